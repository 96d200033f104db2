#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace deltak {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic seed schedule: stream `idx` of a master seed.  Every source of
/// randomness in the library is keyed this way, so results depend only on the
/// master seed and the logical stream index, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t idx) {
    return splitmix64(master + 0x9E3779B97F4A7C15ULL * (idx + 1));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t idx) {
    return Rng(derive_seed(master, idx));
}

/// Unbiased uniform draw from {0, ..., n-1} via rejection.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return static_cast<std::size_t>(v % n);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller.
inline double gaussian(Rng& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform_real(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace deltak
