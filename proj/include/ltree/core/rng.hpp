#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace ltree {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with explicit state so runs are reproducible and resumable.
// All randomness in the pipeline flows through instances of this class.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    // Deterministically derive an independent stream from (seed, words...).
    // Used to give each (patch, level, step) its own stream so that results
    // do not depend on thread scheduling.
    static Rng derive(uint64_t seed, std::initializer_list<uint64_t> words) {
        uint64_t sm = seed ^ 0xd1b54a32d192ed03ULL;
        uint64_t acc = splitmix64(sm);
        for (uint64_t w : words) {
            sm ^= w + 0x9e3779b97f4a7c15ULL + (acc << 6) + (acc >> 2);
            acc = splitmix64(sm);
        }
        return Rng(acc);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + int64_t(next_u64() % uint64_t(hi - lo + 1));
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    float normal_f() { return float(normal()); }

    // State serialization for resumable training.
    std::vector<uint64_t> save_state() const {
        std::vector<uint64_t> v(s_, s_ + 4);
        v.push_back(has_spare_ ? 1 : 0);
        uint64_t bits;
        static_assert(sizeof(double) == sizeof(uint64_t));
        std::memcpy(&bits, &spare_, 8);
        v.push_back(bits);
        return v;
    }

    void load_state(const std::vector<uint64_t>& v) {
        for (int i = 0; i < 4; ++i) s_[i] = v.at(i);
        has_spare_ = v.at(4) != 0;
        uint64_t bits = v.at(5);
        std::memcpy(&spare_, &bits, 8);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4] = {};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ltree
