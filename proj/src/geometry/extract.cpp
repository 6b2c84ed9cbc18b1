#include "ltree/geometry/extract.hpp"

#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace ltree::geo {

namespace {

// Cube corner offsets; tets split around the v0-v6 diagonal so shared faces
// of adjacent cells triangulate identically (crack-free).
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kTets[6][4] = {{0, 5, 1, 6}, {0, 1, 2, 6}, {0, 2, 3, 6},
                             {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}};

struct EdgeKeyHash {
    size_t operator()(uint64_t k) const { return std::hash<uint64_t>()(k); }
};

}  // namespace

TriangleMesh extract_mesh(const TUDFGrid& grid, double iso_level) {
    if (!(iso_level > 0.0 && iso_level < grid.truncation))
        throw std::invalid_argument("extract_mesh: iso_level must be in (0, truncation)");

    const Grid3f& g = grid.values;
    TriangleMesh mesh;
    if (g.nx < 2 || g.ny < 2 || g.nz < 2) return mesh;

    // Welds the vertex interpolated on each grid edge (pair of voxel ids).
    std::unordered_map<uint64_t, int, EdgeKeyHash> edge_vertex;

    const float iso = float(iso_level);
    auto vid = [&](int x, int y, int z) -> uint64_t { return uint64_t(g.idx(x, y, z)); };

    auto edge_point = [&](int xa, int ya, int za, int xb, int yb, int zb) -> int {
        uint64_t ia = vid(xa, ya, za), ib = vid(xb, yb, zb);
        uint64_t key = ia < ib ? (ia << 32 | ib) : (ib << 32 | ia);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        float fa = g.at(xa, ya, za), fb = g.at(xb, yb, zb);
        double t = (double(iso) - fa) / (double(fb) - fa);
        Vec3 pa = grid.voxel_center(xa, ya, za);
        Vec3 pb = grid.voxel_center(xb, yb, zb);
        Vec3 p = pa + (pb - pa) * t;
        int idx = int(mesh.vertices.size());
        mesh.vertices.push_back(p);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    int cx[8], cy[8], cz[8];
    float fv[8];
    for (int z = 0; z + 1 < g.nz; ++z)
        for (int y = 0; y + 1 < g.ny; ++y)
            for (int x = 0; x + 1 < g.nx; ++x) {
                for (int c = 0; c < 8; ++c) {
                    cx[c] = x + kCorner[c][0];
                    cy[c] = y + kCorner[c][1];
                    cz[c] = z + kCorner[c][2];
                    fv[c] = g.at(cx[c], cy[c], cz[c]);
                }
                for (const auto& tet : kTets) {
                    int mask = 0;
                    for (int i = 0; i < 4; ++i)
                        if (fv[tet[i]] < iso) mask |= 1 << i;
                    if (mask == 0 || mask == 15) continue;

                    auto ep = [&](int i, int j) {
                        int a = tet[i], b = tet[j];
                        return edge_point(cx[a], cy[a], cz[a], cx[b], cy[b], cz[b]);
                    };
                    auto tri = [&](int a, int b, int c) {
                        if (a != b && b != c && a != c) mesh.faces.push_back({a, b, c});
                    };

                    switch (mask) {
                        case 1:  tri(ep(0, 1), ep(0, 2), ep(0, 3)); break;
                        case 14: tri(ep(0, 1), ep(0, 3), ep(0, 2)); break;
                        case 2:  tri(ep(1, 0), ep(1, 3), ep(1, 2)); break;
                        case 13: tri(ep(1, 0), ep(1, 2), ep(1, 3)); break;
                        case 4:  tri(ep(2, 0), ep(2, 1), ep(2, 3)); break;
                        case 11: tri(ep(2, 0), ep(2, 3), ep(2, 1)); break;
                        case 8:  tri(ep(3, 0), ep(3, 2), ep(3, 1)); break;
                        case 7:  tri(ep(3, 0), ep(3, 1), ep(3, 2)); break;
                        case 3:  // v0, v1 inside
                            tri(ep(0, 2), ep(0, 3), ep(1, 3));
                            tri(ep(0, 2), ep(1, 3), ep(1, 2));
                            break;
                        case 12:
                            tri(ep(0, 2), ep(1, 3), ep(0, 3));
                            tri(ep(0, 2), ep(1, 2), ep(1, 3));
                            break;
                        case 5:  // v0, v2 inside
                            tri(ep(0, 1), ep(2, 1), ep(2, 3));
                            tri(ep(0, 1), ep(2, 3), ep(0, 3));
                            break;
                        case 10:
                            tri(ep(0, 1), ep(2, 3), ep(2, 1));
                            tri(ep(0, 1), ep(0, 3), ep(2, 3));
                            break;
                        case 6:  // v1, v2 inside
                            tri(ep(1, 0), ep(2, 0), ep(2, 3));
                            tri(ep(1, 0), ep(2, 3), ep(1, 3));
                            break;
                        case 9:
                            tri(ep(1, 0), ep(2, 3), ep(2, 0));
                            tri(ep(1, 0), ep(1, 3), ep(2, 3));
                            break;
                        default: break;
                    }
                }
            }
    return mesh;
}

}  // namespace ltree::geo
