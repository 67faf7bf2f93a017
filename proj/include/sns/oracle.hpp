#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sns/cell_key.hpp"
#include "sns/count_sketch.hpp"
#include "sns/errors.hpp"
#include "sns/format.hpp"
#include "sns/hash.hpp"
#include "sns/heavy_hitters.hpp"

namespace sns {

/// Exact per-key frequencies of a stream held in memory.
class ExactCounts {
 public:
  void add(CellKey key, std::uint64_t times = 1) {
    counts_[key] += times;
    length_ += times;
  }

  std::uint64_t stream_length() const noexcept { return length_; }
  std::size_t distinct() const noexcept { return counts_.size(); }
  std::uint64_t count(CellKey key) const {
    const auto it = counts_.find(key);
    return it == counts_.end() ? 0 : it->second;
  }
  const std::unordered_map<CellKey, std::uint64_t>& map() const noexcept { return counts_; }

  /// All keys ranked by exact count (descending, key ascending).
  std::vector<HeavyHitter> ranked() const {
    std::vector<HeavyHitter> out;
    out.reserve(counts_.size());
    for (const auto& [k, c] : counts_) out.push_back(HeavyHitter{k, static_cast<std::int64_t>(c), 0});
    std::sort(out.begin(), out.end(),
              [](const HeavyHitter& a, const HeavyHitter& b) { return ranks_before(a.key, a.freq, b.key, b.freq); });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
    return out;
  }

  /// Euclidean norm of the frequency vector.
  double l2() const {
    long double acc = 0;
    for (const auto& [k, c] : counts_) acc += static_cast<long double>(c) * static_cast<long double>(c);
    return static_cast<double>(std::sqrt(acc));
  }

 private:
  std::unordered_map<CellKey, std::uint64_t> counts_;
  std::uint64_t length_ = 0;
};

template <typename Keys>
ExactCounts exact_count(const Keys& keys) {
  ExactCounts out;
  for (CellKey k : keys) out.add(k);
  return out;
}

/// Inclusive, 1-based range of exact ranks.
struct RankBand {
  std::uint64_t first = 1;
  std::uint64_t last = 1;
};

struct BandError {
  RankBand band;
  std::size_t keys = 0;
  double rms_relative_error = 0;
};

struct ErrorBandReport {
  std::vector<BandError> bands;
};

/// rms of |f - f_hat| / f over each band of exact ranks.
inline ErrorBandReport error_bands(const ExactCounts& exact, const CountSketch& sketch, std::span<const RankBand> bands) {
  const auto ranked = exact.ranked();
  ErrorBandReport report;
  for (const auto& b : bands) {
    if (b.first < 1 || b.first > b.last) {
      throw UsageError("empty rank band [" + std::to_string(b.first) + ", " + std::to_string(b.last) + "]");
    }
    if (b.last > ranked.size()) {
      throw UsageError("rank band [" + std::to_string(b.first) + ", " + std::to_string(b.last) +
                       "] exceeds the " + std::to_string(ranked.size()) + " distinct keys");
    }
    long double acc = 0;
    for (std::uint64_t r = b.first; r <= b.last; ++r) {
      const auto& h = ranked[r - 1];
      const double f = static_cast<double>(h.freq);
      const double rel = std::abs(f - static_cast<double>(sketch.estimate(h.key))) / f;
      acc += static_cast<long double>(rel) * rel;
    }
    const std::size_t n = b.last - b.first + 1;
    report.bands.push_back(BandError{b, n, static_cast<double>(std::sqrt(acc / n))});
  }
  return report;
}

inline void write_error_bands_csv(std::ostream& out, const ErrorBandReport& r) {
  out << "rank_first,rank_last,keys,rms_rel_error\n";
  for (const auto& b : r.bands) {
    out << b.band.first << ',' << b.band.last << ',' << b.keys << ',' << format_double(b.rms_relative_error) << '\n';
  }
}

/// Independent Bernoulli(p) retention of each element. The decision for
/// element j depends only on (seed, j).
template <typename Keys>
std::vector<CellKey> subsample(const Keys& keys, double p, std::uint64_t seed) {
  if (!(p > 0 && p <= 1)) throw UsageError("subsampling rate must be in (0, 1]");
  std::vector<CellKey> out;
  const std::uint64_t base = mix64(seed ^ 0x243f6a8885a308d3ULL);
  std::uint64_t j = 0;
  for (CellKey k : keys) {
    if (unit_interval(mix64(base + (j++) * kGoldenGamma)) < p) out.push_back(k);
  }
  return out;
}

/// Expected number of heavy hitters sharing their 3^D contact neighborhood
/// with at least one other, under a Poisson model of HH placement.
struct CollisionEstimate {
  double heavy_hitters = 0;    // K
  std::uint32_t dims = 0;      // D
  std::uint32_t bins = 0;      // M
  double log10_volume = 0;     // log10(M^D)
  double log10_neighborhood = 0;  // log10(3^D)
  double lambda = 0;           // K / V
  double rho = 0;              // W * lambda
  double collisions = 0;       // C
};

/// P(N >= 2) for N ~ Poisson(rho), without cancellation at small rho.
inline double poisson_at_least_two(double rho) {
  if (rho <= 0) return 0;
  if (rho < 0.5) {
    // e^-rho * sum_{k>=2} rho^k / k!
    double term = rho * rho / 2;
    double sum = 0;
    for (int k = 2; k < 60 && term > sum * 1e-18; ++k) {
      sum += term;
      term *= rho / (k + 1);
    }
    return std::exp(-rho) * sum;
  }
  return -std::expm1(-rho) - rho * std::exp(-rho);
}

/// C = K * P(neighborhood holds >= 2 HHs) = K * (1 - e^-rho (1 + rho)),
/// rho = K * 3^D / M^D. Powers are taken in log space.
inline CollisionEstimate collision_rate(double heavy_hitters, std::uint32_t dims, std::uint32_t bins) {
  if (!(heavy_hitters >= 0)) throw UsageError("K must be >= 0");
  if (dims < 1) throw UsageError("D must be >= 1");
  if (bins < 2) throw UsageError("M must be >= 2");
  CollisionEstimate e;
  e.heavy_hitters = heavy_hitters;
  e.dims = dims;
  e.bins = bins;
  e.log10_volume = dims * std::log10(static_cast<double>(bins));
  e.log10_neighborhood = dims * std::log10(3.0);
  const double ln_lambda_unit = -static_cast<double>(dims) * std::log(static_cast<double>(bins));
  e.lambda = heavy_hitters * std::exp(ln_lambda_unit);
  e.rho = heavy_hitters * std::exp(dims * (std::log(3.0) - std::log(static_cast<double>(bins))));
  e.collisions = heavy_hitters * poisson_at_least_two(e.rho);
  return e;
}

inline void write_collision_report(std::ostream& out, const CollisionEstimate& e, bool csv) {
  if (csv) {
    out << "K,D,M,log10_V,log10_W,lambda,rho,C\n"
        << format_double(e.heavy_hitters) << ',' << e.dims << ',' << e.bins << ',' << format_double(e.log10_volume)
        << ',' << format_double(e.log10_neighborhood) << ',' << format_double(e.lambda) << ','
        << format_double(e.rho) << ',' << format_double(e.collisions) << '\n';
    return;
  }
  out << "heavy hitters K     " << format_double(e.heavy_hitters) << '\n'
      << "dimensions D        " << e.dims << '\n'
      << "bins per axis M     " << e.bins << '\n'
      << "log10 V = log10 M^D " << format_double(e.log10_volume) << '\n'
      << "log10 W = log10 3^D " << format_double(e.log10_neighborhood) << '\n'
      << "lambda = K/V        " << format_double(e.lambda) << '\n'
      << "rho = W*lambda      " << format_double(e.rho) << '\n'
      << "collisions C        " << format_double(e.collisions) << '\n';
}

}  // namespace sns
