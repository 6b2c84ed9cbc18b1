#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltree::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

// Append-only little-endian byte buffer.
struct ByteWriter {
    std::string buf;

    void raw(const void* p, size_t n) { buf.append(reinterpret_cast<const char*>(p), n); }
    void u8(uint8_t v) { raw(&v, 1); }
    void u32(uint32_t v) { raw(&v, 4); }
    void i32(int32_t v) { raw(&v, 4); }
    void u64(uint64_t v) { raw(&v, 8); }
    void i64(int64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void f32_array(const float* p, size_t n) { raw(p, n * 4); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
};

struct ByteReader {
    const char* p;
    size_t n;
    size_t pos = 0;

    ByteReader(const void* data, size_t size) : p(static_cast<const char*>(data)), n(size) {}
    explicit ByteReader(const std::string& s) : ByteReader(s.data(), s.size()) {}
    explicit ByteReader(std::string&&) = delete;  // would dangle

    void raw(void* out, size_t count) {
        if (pos + count > n) throw std::runtime_error("binio: truncated input");
        std::memcpy(out, p + pos, count);
        pos += count;
    }
    uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
    uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
    int32_t i32() { int32_t v; raw(&v, 4); return v; }
    uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
    int64_t i64() { int64_t v; raw(&v, 8); return v; }
    float f32() { float v; raw(&v, 4); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    void f32_array(float* out, size_t count) { raw(out, count * 4); }
    std::string str() {
        uint64_t len = u64();
        if (pos + len > n) throw std::runtime_error("binio: truncated string");
        std::string s(p + pos, len);
        pos += len;
        return s;
    }
    bool done() const { return pos == n; }
};

std::string read_file(const std::string& path);

// Write to <path>.tmp.<pid> then rename, so readers never observe a partial
// artifact.
void write_file_atomic(const std::string& path, const std::string& bytes);

std::string sha256_hex(const void* data, size_t n);
inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

}  // namespace ltree::io
