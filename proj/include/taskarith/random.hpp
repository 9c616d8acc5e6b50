#pragma once

#include <cstdint>
#include <random>

namespace taskarith {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer applied to `base ^ golden * (stream + 1)`.
/// Used to derive independent seeds for grid points, batches and tasks so
/// that adding a new stream never shifts an existing one.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace taskarith
