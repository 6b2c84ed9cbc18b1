#include "ltree/geometry/augment.hpp"

namespace ltree::geo {

namespace {

Grid3f rot90_ccw(const Grid3f& in) {
    Grid3f out(in.ny, in.nx, in.nz);
    for (int z = 0; z < in.nz; ++z)
        for (int v = 0; v < out.ny; ++v)
            for (int u = 0; u < out.nx; ++u)
                out.at(u, v, z) = in.at(v, in.ny - 1 - u, z);
    return out;
}

}  // namespace

Grid3f augment(const Grid3f& grid, const Augmentation& aug) {
    Grid3f cur = grid;
    if (aug.flip_x) {
        Grid3f out(cur.nx, cur.ny, cur.nz);
        for (int z = 0; z < cur.nz; ++z)
            for (int y = 0; y < cur.ny; ++y)
                for (int x = 0; x < cur.nx; ++x)
                    out.at(x, y, z) = cur.at(cur.nx - 1 - x, y, z);
        cur = std::move(out);
    }
    if (aug.flip_y) {
        Grid3f out(cur.nx, cur.ny, cur.nz);
        for (int z = 0; z < cur.nz; ++z)
            for (int y = 0; y < cur.ny; ++y)
                for (int x = 0; x < cur.nx; ++x)
                    out.at(x, y, z) = cur.at(x, cur.ny - 1 - y, z);
        cur = std::move(out);
    }
    int turns = ((aug.rot_quarter_turns % 4) + 4) % 4;
    for (int i = 0; i < turns; ++i) cur = rot90_ccw(cur);
    return cur;
}

TUDFGrid augment(const TUDFGrid& grid, const Augmentation& aug) {
    TUDFGrid out = grid;
    out.values = augment(grid.values, aug);
    return out;
}

}  // namespace ltree::geo
