#include "ltree/synth/patch_schedule.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ltree::synth {

namespace {

// Axis start positions: stride = patch * (1 - overlap); the last start is
// shifted inward so every placement keeps the full patch size.
std::vector<int> axis_starts(int extent, int patch, double overlap_fraction) {
    const int stride = std::max(1, int(std::lround(patch * (1.0 - overlap_fraction))));
    std::vector<int> starts;
    for (int s = 0;; s += stride) {
        if (s + patch >= extent) {
            starts.push_back(extent - patch);
            break;
        }
        starts.push_back(s);
    }
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
    return starts;
}

}  // namespace

PatchSchedule plan_patches(const int extent[3], const int patch[3], double overlap_fraction,
                           const Grid3f* initial_coverage) {
    if (!(overlap_fraction > 0.0 && overlap_fraction < 1.0))
        throw std::invalid_argument("plan_patches: overlap_fraction must be in (0,1)");
    for (int a = 0; a < 3; ++a)
        if (extent[a] < patch[a])
            throw std::invalid_argument("plan_patches: extent smaller than patch on axis " +
                                        std::to_string(a));
    if (extent[2] != patch[2])
        throw std::invalid_argument("plan_patches: z extent must equal patch z (single patch tall)");

    PatchSchedule schedule;
    for (int a = 0; a < 3; ++a) {
        schedule.extent[a] = extent[a];
        schedule.patch[a] = patch[a];
    }
    schedule.overlap_fraction = overlap_fraction;

    const auto xs = axis_starts(extent[0], patch[0], overlap_fraction);
    const auto ys = axis_starts(extent[1], patch[1], overlap_fraction);

    // Breadth-first lattice order: wave w covers cells with max(ix,iy) == w,
    // x-adjacent cells first, then y-adjacent, then the corner.
    std::vector<std::pair<int, int>> order;
    const int nwaves = int(std::max(xs.size(), ys.size()));
    for (int w = 0; w < nwaves; ++w) {
        if (w == 0) {
            order.push_back({0, 0});
            continue;
        }
        if (w < int(xs.size()))
            for (int iy = 0; iy < std::min(w, int(ys.size())); ++iy) order.push_back({w, iy});
        if (w < int(ys.size())) {
            for (int ix = 0; ix < std::min(w, int(xs.size())); ++ix) order.push_back({ix, w});
            if (w < int(xs.size())) order.push_back({w, w});
        }
    }

    Grid3f coverage = initial_coverage ? *initial_coverage
                                       : Grid3f(extent[0], extent[1], extent[2], 0.f);
    if (initial_coverage &&
        (coverage.nx != extent[0] || coverage.ny != extent[1] || coverage.nz != extent[2]))
        throw std::invalid_argument("plan_patches: initial coverage dims mismatch");

    for (const auto& [ix, iy] : order) {
        PatchPlacement pl;
        pl.x0 = xs[size_t(ix)];
        pl.y0 = ys[size_t(iy)];
        pl.z0 = 0;
        pl.dx = patch[0];
        pl.dy = patch[1];
        pl.dz = patch[2];
        pl.wave = std::max(ix, iy);
        pl.known_mask.resize(size_t(pl.voxels()));
        for (int z = 0; z < pl.dz; ++z)
            for (int y = 0; y < pl.dy; ++y)
                for (int x = 0; x < pl.dx; ++x)
                    pl.known_mask[size_t((int64_t(z) * pl.dy + y) * pl.dx + x)] =
                        coverage.at(pl.x0 + x, pl.y0 + y, pl.z0 + z) != 0.f ? 1 : 0;
        for (int z = 0; z < pl.dz; ++z)
            for (int y = 0; y < pl.dy; ++y)
                for (int x = 0; x < pl.dx; ++x)
                    coverage.at(pl.x0 + x, pl.y0 + y, pl.z0 + z) = 1.f;
        schedule.placements.push_back(std::move(pl));
    }

    // Every voxel must be covered by at least one placement.
    for (float v : coverage.data)
        if (v == 0.f) throw std::logic_error("plan_patches: schedule left voxels uncovered");
    return schedule;
}

}  // namespace ltree::synth
