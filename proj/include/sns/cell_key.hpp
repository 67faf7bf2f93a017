#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "sns/errors.hpp"

namespace sns {

using u128 = unsigned __int128;

/// 128-bit grid-cell identifier (mixed-radix encoding of bin indices).
struct CellKey {
  u128 value = 0;

  constexpr CellKey() = default;
  constexpr explicit CellKey(u128 v) : value(v) {}
  static constexpr CellKey from_parts(std::uint64_t hi, std::uint64_t lo) {
    return CellKey{(static_cast<u128>(hi) << 64) | lo};
  }

  constexpr std::uint64_t hi() const { return static_cast<std::uint64_t>(value >> 64); }
  constexpr std::uint64_t lo() const { return static_cast<std::uint64_t>(value); }

  friend constexpr bool operator==(CellKey a, CellKey b) { return a.value == b.value; }
  friend constexpr std::strong_ordering operator<=>(CellKey a, CellKey b) {
    return a.value <=> b.value;
  }
};

inline std::string to_string(u128 v) {
  if (v == 0) return "0";
  std::string out;
  while (v != 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

inline std::string to_string(CellKey k) { return to_string(k.value); }

/// Parses a decimal 128-bit value. Throws DataError on junk or overflow.
inline CellKey parse_cell_key(std::string_view text) {
  if (text.empty()) throw DataError("empty cell key");
  constexpr u128 kMax = ~static_cast<u128>(0);
  u128 v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') throw DataError("invalid cell key '" + std::string(text) + "'");
    const unsigned digit = static_cast<unsigned>(c - '0');
    if (v > (kMax - digit) / 10) throw DataError("cell key out of 128-bit range: " + std::string(text));
    v = v * 10 + digit;
  }
  return CellKey{v};
}

}  // namespace sns

template <>
struct std::hash<sns::CellKey> {
  std::size_t operator()(sns::CellKey k) const noexcept {
    // splitmix-style fold; keys are already well spread by construction
    std::uint64_t x = k.lo() ^ (k.hi() * 0x9e3779b97f4a7c15ULL);
    x ^= x >> 31;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 29;
    return static_cast<std::size_t>(x);
  }
};
