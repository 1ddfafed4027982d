#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fgp::rng {

// SplitMix64 with explicit stream splitting. All randomized operations in
// this project draw from one of these streams, keyed by (seed, tag...), so
// "same seed, same output" holds independently of call interleaving.
// Gaussian variates use the Box-Muller transform with a fresh pair of
// uniforms per draw (no cached second value).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Independent child stream; does not advance this stream.
    SplitMix64 split(std::uint64_t tag) const {
        return SplitMix64(mix(state_ ^ mix(tag ^ 0x632BE59BD9B4E019ULL)));
    }

    // uniform on [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1]
    double uniform01_open_left() { return 1.0 - uniform01(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // standard normal via Box-Muller; consumes exactly two uniforms
    double normal() {
        const double u1 = uniform01_open_left();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

}  // namespace fgp::rng
