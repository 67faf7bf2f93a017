#pragma once

#include <cstdint>

#include "sns/cell_key.hpp"

namespace sns {

/// 64-bit avalanche finalizer (MurmurHash3 fmix64 constants).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kSignSalt = 0xA5A5A5A5A5A5A5A5ULL;

/// Bucket and sign hash for one sketch row. Pure function of
/// (seed, row, key); the constants are part of the sketch file contract,
/// changing them breaks mergeability with existing files.
class HashPair {
 public:
  constexpr HashPair() = default;
  constexpr HashPair(std::uint64_t seed, std::uint32_t row) noexcept
      : row_seed_(mix64(seed + static_cast<std::uint64_t>(row) * kGoldenGamma)) {}

  constexpr std::uint64_t raw(CellKey key) const noexcept {
    return mix64(key.lo() ^ mix64(key.hi() ^ row_seed_));
  }

  constexpr std::uint64_t bucket(CellKey key, std::uint64_t cols) const noexcept {
    return raw(key) % cols;
  }

  constexpr int sign(CellKey key) const noexcept { return sign_of_raw(raw(key)); }

  static constexpr int sign_of_raw(std::uint64_t h) noexcept {
    return (mix64(h ^ kSignSalt) & 1U) ? +1 : -1;
  }

  constexpr std::uint64_t row_seed() const noexcept { return row_seed_; }

 private:
  std::uint64_t row_seed_ = 0;
};

/// Uniform double in [0, 1) from a 64-bit hash value (top 53 bits).
constexpr double unit_interval(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace sns
