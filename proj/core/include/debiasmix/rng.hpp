#pragma once

#include <cstdint>
#include <random>

namespace debiasmix {

using Rng = std::mt19937_64;

// Independent, reproducible stream for (seed, stream) pairs.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return Rng(seq);
}

// Named stream identifiers so distinct pipeline stages never share draws.
namespace streams {
inline constexpr std::uint64_t kGenerator = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kPairs = 4;
inline constexpr std::uint64_t kMix = 5;
inline constexpr std::uint64_t kSplit = 6;
inline constexpr std::uint64_t kAppearance = 7;
}  // namespace streams

}  // namespace debiasmix
