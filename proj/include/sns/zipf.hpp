#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sns/cell_key.hpp"
#include "sns/errors.hpp"
#include "sns/hash.hpp"

namespace sns {

/// Draws ranks 1..n with P(r) proportional to r^-s by inverse-CDF lookup.
/// mt19937_64 output is fully specified, so streams are reproducible
/// across platforms.
class ZipfGenerator {
 public:
  ZipfGenerator(std::uint64_t n, double exponent, std::uint64_t seed) : rng_(seed) {
    if (n == 0) throw UsageError("zipf needs at least one key");
    if (!(exponent >= 0)) throw UsageError("zipf exponent must be >= 0");
    cdf_.resize(n);
    long double acc = 0;
    for (std::uint64_t r = 1; r <= n; ++r) {
      acc += std::pow(static_cast<long double>(r), -static_cast<long double>(exponent));
      cdf_[r - 1] = static_cast<double>(acc);
    }
    for (auto& c : cdf_) c = static_cast<double>(c / static_cast<double>(acc));
    cdf_.back() = 1.0;
  }

  std::uint64_t keys() const noexcept { return cdf_.size(); }

  std::uint64_t next_rank() {
    const double u = unit_interval(rng_());
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
  }

  CellKey next() { return key_for_rank(next_rank()); }

  /// Keys are scattered over the 128-bit space rather than 1..n.
  static CellKey key_for_rank(std::uint64_t rank) { return CellKey::from_parts(mix64(rank), rank); }

  std::vector<CellKey> take(std::uint64_t m) {
    std::vector<CellKey> out;
    out.reserve(m);
    for (std::uint64_t i = 0; i < m; ++i) out.push_back(next());
    return out;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<double> cdf_;
};

}  // namespace sns
