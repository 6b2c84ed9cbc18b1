#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "ltree/core/binio.hpp"
#include "ltree/core/rng.hpp"
#include "ltree/core/threads.hpp"
#include "ltree/core/tudf_io.hpp"

using namespace ltree;

TEST_CASE("rng: deterministic and serializable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(7);
    for (int i = 0; i < 13; ++i) c.normal();
    auto state = c.save_state();
    std::vector<double> expect;
    for (int i = 0; i < 16; ++i) expect.push_back(c.normal());
    Rng d(0);
    d.load_state(state);
    for (int i = 0; i < 16; ++i) CHECK(d.normal() == expect[size_t(i)]);
}

TEST_CASE("rng: derived streams differ and are stable") {
    Rng a = Rng::derive(1, {2, 3});
    Rng b = Rng::derive(1, {2, 3});
    Rng c = Rng::derive(1, {2, 4});
    const uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
}

TEST_CASE("rng: normal moments roughly standard") {
    Rng rng(11);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("sha256 known vectors") {
    CHECK(io::sha256_hex(std::string("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(io::sha256_hex(std::string("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    std::string a(1000000, 'a');
    CHECK(io::sha256_hex(a) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("byte writer/reader roundtrip") {
    io::ByteWriter w;
    w.u32(0xdeadbeef);
    w.f32(1.5f);
    w.f64(-2.25);
    w.str("hello");
    w.i64(-7);
    io::ByteReader r(w.buf);
    CHECK(r.u32() == 0xdeadbeef);
    CHECK(r.f32() == 1.5f);
    CHECK(r.f64() == -2.25);
    CHECK(r.str() == "hello");
    CHECK(r.i64() == -7);
    CHECK(r.done());
}

TEST_CASE("tudf file roundtrip is bit-exact") {
    TUDFGrid g;
    g.values = Grid3f(3, 4, 5);
    g.voxel_size = 0.022f;
    g.origin = {0.5, -1.0, 2.0};
    g.truncation = 0.1f;
    Rng rng(3);
    for (auto& v : g.values.data) v = float(rng.uniform()) * g.truncation;

    const std::string path = std::filesystem::temp_directory_path() / "roundtrip.tudf";
    io::save_tudf(path, g);
    TUDFGrid back = io::load_tudf(path);
    CHECK(back.values.nx == 3);
    CHECK(back.values.ny == 4);
    CHECK(back.values.nz == 5);
    CHECK(back.voxel_size == g.voxel_size);
    CHECK(back.truncation == g.truncation);
    CHECK(back.values.data == g.values.data);
    std::filesystem::remove(path);
}

TEST_CASE("atomic write leaves no temp droppings") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "ltree_atomic_test";
    fs::create_directories(dir);
    io::write_file_atomic((dir / "x.bin").string(), "payload");
    int count = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        ++count;
        CHECK(e.path().filename() == "x.bin");
    }
    CHECK(count == 1);
    CHECK(io::read_file((dir / "x.bin").string()) == "payload");
    fs::remove_all(dir);
}

TEST_CASE("parallel_for covers the range once") {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) hits[size_t(i)] += 1;
    });
    for (int h : hits) CHECK(h == 1);
}
