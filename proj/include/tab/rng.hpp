#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent seeds from a base seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix64(mix64(a, b), c);
}

/// Uniform double in [0, 1). Implemented directly on the 64-bit stream so the
/// sequence does not depend on the standard library's distribution internals.
inline double uniform_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
inline int uniform_int(Rng& rng, int n) {
    return static_cast<int>(static_cast<std::uint64_t>(uniform_double(rng) * n)) % n;
}

/// Draws an index proportionally to `weights`. Weights need not be
/// normalized; total must be positive. When exactly one weight is positive
/// the draw is deterministic and consumes no randomness.
inline int sample_weighted(Rng& rng, std::span<const double> weights) {
    double total = 0.0;
    int positive = -1;
    int count = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) {
            total += weights[i];
            positive = static_cast<int>(i);
            ++count;
        }
    }
    if (count == 1) return positive;
    double u = uniform_double(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc && weights[i] > 0.0) return static_cast<int>(i);
    }
    return positive; // numeric tail
}

} // namespace tab
