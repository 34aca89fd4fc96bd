#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dempref {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed splitting: every consumer of randomness draws its seed from
// (parent, stream name, index). Streams with different names or indices are
// decorrelated; the mapping is stable across platforms and releases.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(parent ^ fnv1a64(stream)) + index);
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace dempref
