#include "ltree/geometry/procgen.hpp"

#include <stdexcept>
#include <string>

namespace ltree::geo {

void SceneSpec::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("SceneSpec: ") + what);
    };
    require(room_count_min >= 1 && room_count_max >= room_count_min, "room count range empty");
    require(room_width_min > 0 && room_width_max >= room_width_min, "room width range empty");
    require(room_depth_min > 0 && room_depth_max >= room_depth_min, "room depth range empty");
    require(room_height > 0, "room height must be positive");
    require(wall_thickness > 0, "wall thickness must be positive");
    require(furniture_min >= 0 && furniture_max >= furniture_min, "furniture range empty");
    require(furniture_size_min > 0 && furniture_size_max >= furniture_size_min,
            "furniture size range empty");
}

TriangleMesh box_mesh(const Box3& box) {
    const Vec3 lo = box.lo, hi = box.hi;
    TriangleMesh m;
    m.vertices = {
        {lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z},
        {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
    // Outward-facing windings per face.
    m.faces = {{0, 2, 1}, {0, 3, 2},   // z-
               {4, 5, 6}, {4, 6, 7},   // z+
               {0, 1, 5}, {0, 5, 4},   // y-
               {3, 7, 6}, {3, 6, 2},   // y+
               {0, 4, 7}, {0, 7, 3},   // x-
               {1, 2, 6}, {1, 6, 5}};  // x+
    return m;
}

TriangleMesh generate_scene(const SceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const double wt = spec.wall_thickness;
    const int rooms = int(rng.uniform_int(spec.room_count_min, spec.room_count_max));
    const double depth = rng.uniform(spec.room_depth_min, spec.room_depth_max);

    std::vector<double> widths(static_cast<size_t>(rooms));
    for (auto& w : widths) w = rng.uniform(spec.room_width_min, spec.room_width_max);

    double total_x = wt;
    for (double w : widths) total_x += w + wt;
    const double total_y = depth + 2 * wt;
    const double total_z = spec.room_height + 2 * wt;

    TriangleMesh scene;
    // Floor and ceiling span the whole row.
    scene.append(box_mesh({{0, 0, 0}, {total_x, total_y, wt}}));
    scene.append(box_mesh({{0, 0, total_z - wt}, {total_x, total_y, total_z}}));
    // Front and back walls.
    scene.append(box_mesh({{0, 0, wt}, {total_x, wt, total_z - wt}}));
    scene.append(box_mesh({{0, total_y - wt, wt}, {total_x, total_y, total_z - wt}}));
    // Cross walls; interior ones are shared between neighboring rooms.
    double x = 0;
    for (int i = 0; i <= rooms; ++i) {
        scene.append(box_mesh({{x, wt, wt}, {x + wt, total_y - wt, total_z - wt}}));
        if (i < rooms) x += wt + widths[size_t(i)];
    }

    // Furniture: solid boxes standing on the floor, disjoint within a room.
    double room_x0 = wt;
    for (int r = 0; r < rooms; ++r) {
        const double room_x1 = room_x0 + widths[size_t(r)];
        const int count = int(rng.uniform_int(spec.furniture_min, spec.furniture_max));
        std::vector<Box3> placed;
        for (int f = 0; f < count; ++f) {
            bool ok = false;
            for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
                double sx = rng.uniform(spec.furniture_size_min, spec.furniture_size_max);
                double sy = rng.uniform(spec.furniture_size_min, spec.furniture_size_max);
                double sz = rng.uniform(spec.furniture_size_min, spec.furniture_size_max);
                sz = std::min(sz, spec.room_height);
                if (sx > room_x1 - room_x0 || sy > depth) continue;
                double px = rng.uniform(room_x0, room_x1 - sx);
                double py = rng.uniform(wt, wt + depth - sy);
                Box3 box{{px, py, wt}, {px + sx, py + sy, wt + sz}};
                bool overlaps = false;
                for (const auto& other : placed)
                    if (box.lo.x < other.hi.x && box.hi.x > other.lo.x &&
                        box.lo.y < other.hi.y && box.hi.y > other.lo.y) {
                        overlaps = true;
                        break;
                    }
                if (overlaps) continue;
                placed.push_back(box);
                scene.append(box_mesh(box));
                ok = true;
            }
            if (!ok)
                throw std::runtime_error(
                    "generate_scene: furniture placement infeasible after 100 retries "
                    "(box must fit inside the room and not overlap placed furniture)");
        }
        room_x0 = room_x1 + wt;
    }

    scene.bounds = Box3{{0, 0, 0}, {total_x, total_y, total_z}};
    scene.validate();
    return scene;
}

}  // namespace ltree::geo
