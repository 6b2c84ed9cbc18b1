#pragma once

#include <cstdint>
#include <vector>

#include "ltree/geometry/mesh.hpp"

namespace ltree::metrics {

struct PointCloud {
    enum class Source { Generated, Reference };

    std::vector<Vec3> points;
    Source source = Source::Generated;

    void validate() const;
};

// Area-weighted uniform surface sampling, deterministic per seed.
// Zero-area meshes are rejected.
PointCloud sample_points(const geo::TriangleMesh& mesh, int n, uint64_t seed);

inline double sq_dist(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace ltree::metrics
