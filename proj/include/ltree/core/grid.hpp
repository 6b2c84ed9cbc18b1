#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltree/core/vec3.hpp"

namespace ltree {

// Dense scalar voxel grid, x fastest: index = x + nx*(y + ny*z).
struct Grid3f {
    int nx = 0, ny = 0, nz = 0;
    std::vector<float> data;

    Grid3f() = default;
    Grid3f(int nx_, int ny_, int nz_, float fill = 0.f)
        : nx(nx_), ny(ny_), nz(nz_), data(size_t(nx_) * ny_ * nz_, fill) {}

    size_t size() const { return data.size(); }
    size_t idx(int x, int y, int z) const { return size_t(z) * ny * nx + size_t(y) * nx + x; }
    float& at(int x, int y, int z) { return data[idx(x, y, z)]; }
    float at(int x, int y, int z) const { return data[idx(x, y, z)]; }
    bool same_dims(const Grid3f& o) const { return nx == o.nx && ny == o.ny && nz == o.nz; }
};

// Truncated unsigned distance field over a voxel grid. Values are sampled at
// voxel centers; origin is the world position of the (0,0,0) voxel corner.
struct TUDFGrid {
    Grid3f values;
    float voxel_size = 0.f;
    Vec3 origin;
    float truncation = 0.f;

    Vec3 voxel_center(int x, int y, int z) const {
        return origin + Vec3{(x + 0.5) * voxel_size, (y + 0.5) * voxel_size,
                             (z + 0.5) * voxel_size};
    }

    void validate() const {
        if (voxel_size <= 0.f) throw std::invalid_argument("TUDFGrid: voxel_size must be > 0");
        if (truncation <= 0.f) throw std::invalid_argument("TUDFGrid: truncation must be > 0");
        for (float v : values.data)
            if (!(v >= 0.f && v <= truncation))
                throw std::invalid_argument("TUDFGrid: value outside [0, truncation]");
    }
};

// C-channel feature grid co-registered with a TUDFGrid at the same level.
// Layout [C, nz, ny, nx], x fastest within a channel.
struct LatentGrid {
    int channels = 0;
    int nx = 0, ny = 0, nz = 0;
    int level = 0;
    std::vector<float> data;

    LatentGrid() = default;
    LatentGrid(int c, int nx_, int ny_, int nz_, int level_ = 0, float fill = 0.f)
        : channels(c), nx(nx_), ny(ny_), nz(nz_), level(level_),
          data(size_t(c) * nx_ * ny_ * nz_, fill) {}

    size_t voxels() const { return size_t(nx) * ny * nz; }
    size_t idx(int c, int x, int y, int z) const {
        return size_t(c) * voxels() + size_t(z) * ny * nx + size_t(y) * nx + x;
    }
    float& at(int c, int x, int y, int z) { return data[idx(c, x, y, z)]; }
    float at(int c, int x, int y, int z) const { return data[idx(c, x, y, z)]; }
};

}  // namespace ltree
