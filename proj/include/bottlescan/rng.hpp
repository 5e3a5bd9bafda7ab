#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bottlescan {

// splitmix64 finalizer; used to derive independent per-stage seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix_seed(master ^ mix_seed(index));
}

// Labeled derivation so pipeline stages can rerun independently.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix_seed(master ^ h);
}

using Rng = std::mt19937_64;

}  // namespace bottlescan
