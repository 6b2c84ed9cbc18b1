#pragma once

#include <cstdint>

#include "ltree/core/rng.hpp"
#include "ltree/geometry/mesh.hpp"

namespace ltree::geo {

// Descriptor for the procedural room generator: a row of box-shell rooms
// that share interior walls, with solid furniture boxes standing on the
// floor. Stands in for an external scene dataset.
struct SceneSpec {
    uint64_t seed = 0;
    int room_count_min = 1;
    int room_count_max = 4;
    double room_width_min = 2.0;   // interior x extent per room, meters
    double room_width_max = 4.0;
    double room_depth_min = 2.0;   // interior y extent, shared by the row
    double room_depth_max = 4.0;
    double room_height = 2.6;      // interior z extent (fixed slab height)
    double wall_thickness = 0.1;
    int furniture_min = 0;
    int furniture_max = 5;
    double furniture_size_min = 0.3;
    double furniture_size_max = 1.2;

    void validate() const;
};

// Axis-aligned solid box as 12 triangles.
TriangleMesh box_mesh(const Box3& box);

// Deterministic in spec.seed. Throws if furniture placement is infeasible
// after bounded retries.
TriangleMesh generate_scene(const SceneSpec& spec);

}  // namespace ltree::geo
