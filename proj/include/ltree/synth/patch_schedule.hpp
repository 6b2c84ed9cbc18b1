#pragma once

#include <cstdint>
#include <vector>

#include "ltree/core/grid.hpp"

namespace ltree::synth {

struct PatchPlacement {
    int x0 = 0, y0 = 0, z0 = 0;  // voxel offset at the synthesized level
    int dx = 0, dy = 0, dz = 0;  // patch dims
    int wave = 0;                // breadth-first wave index
    // 1 = known (covered by earlier placements or the initial canvas),
    // x fastest.
    std::vector<uint8_t> known_mask;

    int64_t voxels() const { return int64_t(dx) * dy * dz; }
};

struct PatchSchedule {
    int extent[3] = {0, 0, 0};
    int patch[3] = {0, 0, 0};
    double overlap_fraction = 0.5;
    std::vector<PatchPlacement> placements;
};

// Breadth-first ground-plane tiling: the seed patch sits at the origin, each
// wave first extends existing patches in x and then in y, and the frontier
// dilates outward. z is a single patch tall. Boundary rows are shifted
// inward to keep the full patch size, which locally increases overlap.
// `initial_coverage` (optional, extent-sized, nonzero = known) seeds the
// known masks for completion runs.
PatchSchedule plan_patches(const int extent[3], const int patch[3], double overlap_fraction,
                           const Grid3f* initial_coverage = nullptr);

}  // namespace ltree::synth
