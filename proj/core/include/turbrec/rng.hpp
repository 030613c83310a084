#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace turbrec {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; mixes a seed with stream identifiers so that
/// independent streams (per frame, per purpose) never share state.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t s = mix_seed(seed);
    for (auto p : parts) s = mix_seed(s ^ mix_seed(p + 0x632BE59BD9B4E019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> parts = {}) {
    return Rng(derive_seed(seed, parts));
}

}  // namespace turbrec
