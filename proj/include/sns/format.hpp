#pragma once

#include <array>
#include <charconv>
#include <string>

namespace sns {

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace sns
