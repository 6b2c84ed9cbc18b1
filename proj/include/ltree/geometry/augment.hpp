#pragma once

#include "ltree/core/grid.hpp"

namespace ltree::geo {

struct Augmentation {
    bool flip_x = false;
    bool flip_y = false;
    int rot_quarter_turns = 0;  // about z, counterclockwise, 0..3

    bool is_identity() const { return !flip_x && !flip_y && rot_quarter_turns % 4 == 0; }
};

// Applies flips first, then the rotation. Pure index permutation, so the
// value multiset and [0, truncation] range are preserved. Rotation by an odd
// number of quarter turns swaps the x/y dimensions.
Grid3f augment(const Grid3f& grid, const Augmentation& aug);
TUDFGrid augment(const TUDFGrid& grid, const Augmentation& aug);

}  // namespace ltree::geo
