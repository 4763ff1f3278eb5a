#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace t2 {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `counter` under `parent`. Order of the path matters.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter) noexcept {
    return mix_seed(mix_seed(parent) ^ (counter * 0xD1B54A32D192ED03ULL + 1));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = parent;
    for (auto p : path) s = derive_seed(s, p);
    return s;
}

/// Uniform index in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace t2
