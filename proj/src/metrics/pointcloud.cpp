#include "ltree/metrics/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ltree/core/rng.hpp"

namespace ltree::metrics {

void PointCloud::validate() const {
    if (points.empty()) throw std::invalid_argument("point cloud is empty");
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw std::invalid_argument("point cloud has non-finite coordinates");
}

PointCloud sample_points(const geo::TriangleMesh& mesh, int n, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_points: n must be >= 1");
    std::vector<double> cumulative;
    cumulative.reserve(mesh.faces.size());
    double total = 0.0;
    for (const auto& f : mesh.faces) {
        total += geo::triangle_area(mesh.vertices[size_t(f[0])], mesh.vertices[size_t(f[1])],
                                    mesh.vertices[size_t(f[2])]);
        cumulative.push_back(total);
    }
    if (total <= 0.0) throw std::invalid_argument("sample_points: mesh has zero total area");

    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        const double pick = rng.uniform() * total;
        const size_t fi = size_t(std::lower_bound(cumulative.begin(), cumulative.end(), pick) -
                                 cumulative.begin());
        const auto& f = mesh.faces[std::min(fi, mesh.faces.size() - 1)];
        const Vec3& a = mesh.vertices[size_t(f[0])];
        const Vec3& b = mesh.vertices[size_t(f[1])];
        const Vec3& c = mesh.vertices[size_t(f[2])];
        // Uniform barycentric via the sqrt trick.
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        cloud.points.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
    }
    return cloud;
}

}  // namespace ltree::metrics
