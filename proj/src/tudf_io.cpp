#include "ltree/core/tudf_io.hpp"

#include "ltree/core/binio.hpp"

namespace ltree::io {

namespace {
constexpr uint32_t kTudfMagic = 0x46445554;  // "TUDF"
constexpr uint32_t kMaskMagic = 0x4b53414d;  // "MASK"
constexpr uint32_t kVersion = 1;
}  // namespace

std::string encode_tudf(const TUDFGrid& grid) {
    ByteWriter w;
    w.u32(kTudfMagic);
    w.u32(kVersion);
    w.u32(uint32_t(grid.values.nx));
    w.u32(uint32_t(grid.values.ny));
    w.u32(uint32_t(grid.values.nz));
    w.f32(grid.voxel_size);
    w.f32(float(grid.origin.x));
    w.f32(float(grid.origin.y));
    w.f32(float(grid.origin.z));
    w.f32(grid.truncation);
    w.f32_array(grid.values.data.data(), grid.values.data.size());
    return std::move(w.buf);
}

TUDFGrid decode_tudf(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.u32() != kTudfMagic) throw std::runtime_error("not a .tudf file");
    uint32_t version = r.u32();
    if (version != kVersion) throw std::runtime_error(".tudf version unsupported");
    TUDFGrid g;
    int nx = int(r.u32()), ny = int(r.u32()), nz = int(r.u32());
    g.voxel_size = r.f32();
    g.origin.x = r.f32();
    g.origin.y = r.f32();
    g.origin.z = r.f32();
    g.truncation = r.f32();
    g.values = Grid3f(nx, ny, nz);
    r.f32_array(g.values.data.data(), g.values.data.size());
    if (!r.done()) throw std::runtime_error(".tudf has trailing bytes");
    return g;
}

void save_tudf(const std::string& path, const TUDFGrid& grid) {
    write_file_atomic(path, encode_tudf(grid));
}

TUDFGrid load_tudf(const std::string& path) { return decode_tudf(read_file(path)); }

void save_mask(const std::string& path, const Grid3f& mask) {
    ByteWriter w;
    w.u32(kMaskMagic);
    w.u32(kVersion);
    w.u32(uint32_t(mask.nx));
    w.u32(uint32_t(mask.ny));
    w.u32(uint32_t(mask.nz));
    for (float v : mask.data) w.u8(v != 0.f ? 1 : 0);
    write_file_atomic(path, std::move(w.buf));
}

Grid3f load_mask(const std::string& path) {
    std::string bytes = read_file(path);
    ByteReader r(bytes);
    if (r.u32() != kMaskMagic) throw std::runtime_error("not a mask file");
    if (r.u32() != kVersion) throw std::runtime_error("mask version unsupported");
    int nx = int(r.u32()), ny = int(r.u32()), nz = int(r.u32());
    Grid3f m(nx, ny, nz);
    for (float& v : m.data) v = r.u8() ? 1.f : 0.f;
    if (!r.done()) throw std::runtime_error("mask has trailing bytes");
    return m;
}

}  // namespace ltree::io
