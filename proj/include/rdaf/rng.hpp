#pragma once

#include <cstdint>

#include "rdaf/common.hpp"

namespace rdaf {

/// SplitMix64 generator. Hand-rolled so streams are identical across
/// platforms and standard-library versions; substreams derive from
/// (seed, index) pairs via mix().
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    i64 uniform_int(i64 lo, i64 hi) {
        RDAF_CHECK(lo <= hi, "uniform_int: empty range [", lo, ",", hi, "]");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<i64>(next() % span);
    }

    bool bernoulli(double p = 0.5) { return uniform() < p; }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        SplitMix64 g(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
        return g.next();
    }

  private:
    std::uint64_t state_;
};

}  // namespace rdaf
