#pragma once

// Counter-based random streams built on the SplitMix64 finalizer. A stream
// is keyed by (seed, index); its k-th 64-bit output is a pure function of
// the key and k, so draws for time point i never depend on how many draws
// other time points consumed. Normals use the Box-Muller transform on pairs
// of uniforms, so output does not depend on the standard library's
// distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ccp::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output function.
constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix(a + kGamma * (mix(b) | 1ULL));
}

/// Seed for repetition `rep` of setting `setting` under a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t setting,
                                    std::uint64_t rep) {
    return combine(combine(master, setting), rep);
}

class Stream {
public:
    constexpr Stream(std::uint64_t seed, std::uint64_t index) : key_(combine(seed, index)) {}

    std::uint64_t next_u64() {
        ++counter_;
        return mix(key_ + counter_ * kGamma);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ccp::rng
