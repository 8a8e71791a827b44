// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace overgen {

// Stable hashing used for every seeded or content-addressed decision in the
// project (feature indices, template selection, seed derivation, presentation
// order). The definitions below are the documented contract; tests/oracles
// reimplements them independently.
//
//   fnv1a64(bytes):  h = 0xcbf29ce484222325; for each byte b: h ^= b; h *= 0x100000001b3
//   mix64(x):        splitmix64 finalizer
//                    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9;
//                    x ^= x >> 27; x *= 0x94d049bb133111eb; x ^= x >> 31
//   hash_combine(h, v) = mix64(h ^ (v + 0x9e3779b97f4a7c15 + (h << 6) + (h >> 2)))

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) noexcept {
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
    return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t hash_values(std::initializer_list<std::uint64_t> values,
                                 std::uint64_t h = kFnvOffset) noexcept {
    for (auto v : values) h = hash_combine(h, v);
    return h;
}

/// Seed derived from a parent seed and a discriminator. Masked to 53 bits so
/// the value survives a round trip through a JSON double.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t discriminator) noexcept {
    return hash_combine(mix64(parent), discriminator) & ((1ULL << 53) - 1);
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view discriminator) noexcept {
    return derive_seed(parent, fnv1a64(discriminator));
}

}  // namespace overgen
