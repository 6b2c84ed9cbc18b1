#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ltree/core/vec3.hpp"

namespace ltree::geo {

struct TriangleMesh {
    std::vector<Vec3> vertices;                    // meters
    std::vector<std::array<int, 3>> faces;         // indices into vertices
    std::optional<Box3> bounds;                    // optional per-scene bounds

    bool empty() const { return faces.empty(); }

    Box3 compute_bounds() const {
        Box3 b = Box3::empty_box();
        for (const auto& v : vertices) b.expand(v);
        return b;
    }

    // Face indices in range, coordinates finite, declared bounds contain all
    // vertices. Throws on violation.
    void validate() const;

    void append(const TriangleMesh& other);
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Exact distance from point p to triangle (a, b, c).
double point_triangle_dist(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace ltree::geo
