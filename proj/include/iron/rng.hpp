#pragma once

#include <cstdint>

namespace iron {

// splitmix64-style mixer for deriving independent stream seeds from a master
// seed plus salts. The derivation rule is part of the reproducibility
// contract: identical inputs give identical streams everywhere.
inline std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return seed_mix(seed_mix(seed, a), b);
}

inline std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return seed_mix(seed_mix(seed_mix(seed, a), b), c);
}

}  // namespace iron
