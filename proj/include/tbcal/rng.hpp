#pragma once

#include <cstdint>
#include <random>

namespace tbcal {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; good avalanche for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic substream seed from (master seed, stream tag, index).
/// Segment/detector substreams derive from here so results do not depend
/// on the degree of parallelism.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(substream_seed(seed, stream, index));
}

namespace streams {
inline constexpr std::uint64_t source = 0x01;
inline constexpr std::uint64_t thin_arm1 = 0x02;
inline constexpr std::uint64_t thin_arm2 = 0x03;
inline constexpr std::uint64_t detector1 = 0x04;
inline constexpr std::uint64_t detector2 = 0x05;
inline constexpr std::uint64_t unpumped1 = 0x14;
inline constexpr std::uint64_t unpumped2 = 0x15;
inline constexpr std::uint64_t sweep = 0x20;
}  // namespace streams

}  // namespace tbcal
