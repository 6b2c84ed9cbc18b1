#include "ltree/geometry/mesh.hpp"

#include <cmath>
#include <stdexcept>

namespace ltree::geo {

void TriangleMesh::validate() const {
    const int n = int(vertices.size());
    for (const auto& v : vertices) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
            throw std::invalid_argument("mesh: non-finite vertex coordinate");
    }
    for (const auto& f : faces) {
        for (int idx : f)
            if (idx < 0 || idx >= n)
                throw std::invalid_argument("mesh: face index out of range");
    }
    if (bounds) {
        for (const auto& v : vertices) {
            // Allow a hair of slack for round-tripped coordinates.
            const double eps = 1e-9;
            if (v.x < bounds->lo.x - eps || v.x > bounds->hi.x + eps ||
                v.y < bounds->lo.y - eps || v.y > bounds->hi.y + eps ||
                v.z < bounds->lo.z - eps || v.z > bounds->hi.z + eps)
                throw std::invalid_argument("mesh: vertex outside declared bounds");
        }
    }
}

void TriangleMesh::append(const TriangleMesh& other) {
    const int base = int(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    faces.reserve(faces.size() + other.faces.size());
    for (const auto& f : other.faces)
        faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

// Ericson, "Real-Time Collision Detection", closest point on triangle.
double point_triangle_dist(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;

    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return (p - (a + ab * v + ac * w)).norm();
}

}  // namespace ltree::geo
