#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sns/binary_io.hpp"
#include "sns/errors.hpp"
#include "sns/format.hpp"
#include "sns/hash.hpp"
#include "sns/heavy_hitters.hpp"
#include "sns/quantizer.hpp"

namespace sns {

/// How many replicas each heavy hitter contributes to the summary.
enum class WeightingScheme {
  single,    // 1
  log_rank,  // 1 + floor(log2(r_max / r))
  log_freq,  // 1 + floor(log2(f / f_min))
};

inline WeightingScheme parse_weighting_scheme(std::string_view s) {
  if (s == "single") return WeightingScheme::single;
  if (s == "log_rank") return WeightingScheme::log_rank;
  if (s == "log_freq") return WeightingScheme::log_freq;
  throw UsageError("unknown weighting scheme '" + std::string(s) + "' (single | log_rank | log_freq)");
}

inline std::string to_string(WeightingScheme s) {
  switch (s) {
    case WeightingScheme::single: return "single";
    case WeightingScheme::log_rank: return "log_rank";
    case WeightingScheme::log_freq: return "log_freq";
  }
  return "?";
}

namespace detail {
// 1 + floor(log2(num / den)) for num >= den >= 1, in exact integer arithmetic.
inline std::uint64_t one_plus_floor_log2_ratio(std::uint64_t num, std::uint64_t den) {
  std::uint64_t k = 0;
  unsigned __int128 d = den;
  while ((d << 1) <= num) {
    d <<= 1;
    ++k;
  }
  return 1 + k;
}
}  // namespace detail

inline std::uint64_t replica_count(const HeavyHitter& hh, WeightingScheme scheme, std::uint64_t r_max,
                                   std::int64_t f_min) {
  switch (scheme) {
    case WeightingScheme::single:
      return 1;
    case WeightingScheme::log_rank:
      if (hh.rank < 1 || hh.rank > r_max) {
        throw DomainError("log_rank needs 1 <= rank <= r_max (rank " + std::to_string(hh.rank) + ", r_max " +
                          std::to_string(r_max) + ")");
      }
      return detail::one_plus_floor_log2_ratio(r_max, hh.rank);
    case WeightingScheme::log_freq:
      if (f_min < 1) throw DomainError("log_freq needs f_min >= 1 (got " + std::to_string(f_min) + ")");
      if (hh.freq < f_min) {
        throw DomainError("log_freq needs f >= f_min (f " + std::to_string(hh.freq) + ", f_min " +
                          std::to_string(f_min) + ")");
      }
      return detail::one_plus_floor_log2_ratio(static_cast<std::uint64_t>(hh.freq),
                                               static_cast<std::uint64_t>(f_min));
  }
  throw DomainError("unknown weighting scheme");
}

struct SummaryPoint {
  std::vector<double> coords;
  std::uint64_t source_rank = 0;
  std::uint64_t replica_index = 0;
  std::int64_t weight_freq = 0;
};

/// Uniform draw in [0, 1) keyed by (seed, rank, replica, axis). Stateless,
/// so expansion order does not matter.
inline double jitter_uniform(std::uint64_t seed, std::uint64_t rank, std::uint64_t replica, std::uint64_t axis) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ (rank * kGoldenGamma));
  h = mix64(h ^ (replica * 0xbb67ae8584caa73bULL + 1));
  h = mix64(h ^ (axis * 0x3c6ef372fe94f82bULL + 2));
  return unit_interval(h);
}

/// Each heavy hitter becomes replica_count() points at its cell center,
/// each coordinate jittered uniformly within +-w/8 (a quarter-cell span).
inline std::vector<SummaryPoint> expand(std::span<const HeavyHitter> list, const GridSpec& grid,
                                        WeightingScheme scheme, std::uint64_t jitter_seed) {
  if (list.empty()) throw UsageError("cannot expand an empty heavy-hitter list");
  std::uint64_t r_max = 0;
  std::int64_t f_min = list.front().freq;
  for (const auto& h : list) {
    r_max = std::max(r_max, h.rank);
    f_min = std::min(f_min, h.freq);
  }
  std::vector<SummaryPoint> out;
  for (const auto& h : list) {
    const auto bins = decode(h.key, grid);
    const auto center = cell_center(bins, grid);
    const std::uint64_t n = replica_count(h, scheme, r_max, f_min);
    for (std::uint64_t rep = 0; rep < n; ++rep) {
      SummaryPoint p{center, h.rank, rep, h.freq};
      for (std::size_t d = 0; d < center.size(); ++d) {
        const double u = jitter_uniform(jitter_seed, h.rank, rep, d);
        p.coords[d] += (2 * u - 1) * grid.width(d) / 8;
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

/// Header "x0,...,x{D-1},rank,replica,freq"; doubles in shortest round-trip
/// form so fixed inputs give byte-identical files.
inline void write_summary_csv(const std::filesystem::path& path, std::size_t dims,
                              std::span<const SummaryPoint> points) {
  AtomicFile f(path);
  auto& out = f.stream();
  for (std::size_t d = 0; d < dims; ++d) out << 'x' << d << ',';
  out << "rank,replica,freq\n";
  for (const auto& p : points) {
    for (double c : p.coords) out << format_double(c) << ',';
    out << p.source_rank << ',' << p.replica_index << ',' << p.weight_freq << '\n';
  }
  f.commit();
}

}  // namespace sns
