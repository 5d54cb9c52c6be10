#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wsireport {

/// FNV-1a 64-bit over arbitrary bytes.
inline uint64_t fnv1a64(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

/// splitmix64 finalizer; counter-based generation is mix64(seed + k*GOLDEN).
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// k-th value of the counter stream rooted at `seed`, as a double in [0,1).
inline double counter_uniform(uint64_t seed, uint64_t k) {
    uint64_t z = seed + k * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

/// Uniform double in [0,1) from a std RNG, bit-reproducible across platforms
/// (mt19937_64 output is fully specified by the standard).
inline double unit_uniform(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) without std::uniform_int_distribution, whose
/// algorithm is implementation-defined.
inline uint64_t uniform_index(std::mt19937_64& g, uint64_t n) {
    return static_cast<uint64_t>(unit_uniform(g) * static_cast<double>(n));
}

/// Per-stage seed derivation: FNV-1a of the stage name XOR the run seed.
inline uint64_t stage_seed(uint64_t run_seed, std::string_view stage) {
    return fnv1a64(stage) ^ run_seed;
}

} // namespace wsireport
