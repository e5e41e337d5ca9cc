// Copyright (C) 2026 handrect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace handrect {

// splitmix64; used to spread user seeds and to derive independent substreams.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic substream derivation: hash the parent seed with a label and
// an index. Streams for different labels/indices are independent for all
// practical purposes.
inline uint64_t derive_seed(uint64_t seed, std::string_view label, uint64_t index = 0) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    uint64_t s = h;
    return splitmix64(s);
}

// mt19937_64 core with explicit uniform/normal mappings, so draws are fully
// specified by this header rather than by the standard library's
// implementation-defined distributions.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]; avoids log(0) in Box-Muller
    double uniform_pos() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        // rejection sampling for unbiased modulo
        uint64_t threshold = (0ull - n) % n;
        for (;;) {
            uint64_t r = engine_();
            if (r >= threshold) return r % n;
        }
    }

    int uniform_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (caches the second value)
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    float normal_f() { return static_cast<float>(normal()); }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace handrect
