#pragma once

#include <cmath>

namespace ltree {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }

    static Vec3 min(const Vec3& a, const Vec3& b) {
        return {std::fmin(a.x, b.x), std::fmin(a.y, b.y), std::fmin(a.z, b.z)};
    }
    static Vec3 max(const Vec3& a, const Vec3& b) {
        return {std::fmax(a.x, b.x), std::fmax(a.y, b.y), std::fmax(a.z, b.z)};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Box3 {
    Vec3 lo, hi;

    bool empty() const { return lo.x >= hi.x || lo.y >= hi.y || lo.z >= hi.z; }
    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    void expand(const Vec3& p) { lo = Vec3::min(lo, p); hi = Vec3::max(hi, p); }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }

    // Squared distance from p to this box (0 if inside).
    double dist2(const Vec3& p) const {
        double d = 0.0;
        for (int i = 0; i < 3; ++i) {
            double v = p[i];
            double l = lo[i], h = hi[i];
            if (v < l) d += (l - v) * (l - v);
            else if (v > h) d += (v - h) * (v - h);
        }
        return d;
    }

    static Box3 empty_box() {
        constexpr double inf = 1e300;
        return {{inf, inf, inf}, {-inf, -inf, -inf}};
    }
};

}  // namespace ltree
