#pragma once

#include <string>

#include "ltree/core/grid.hpp"

namespace ltree::io {

// .tudf container: "TUDF" magic, version, dims (nx,ny,nz), voxel_size,
// origin, truncation, then the value array as little-endian f32, x fastest.
void save_tudf(const std::string& path, const TUDFGrid& grid);
TUDFGrid load_tudf(const std::string& path);

std::string encode_tudf(const TUDFGrid& grid);
TUDFGrid decode_tudf(const std::string& bytes);

// Binary voxel mask (same layout, u8 per voxel) used by `complete`.
void save_mask(const std::string& path, const Grid3f& mask);
Grid3f load_mask(const std::string& path);

}  // namespace ltree::io
