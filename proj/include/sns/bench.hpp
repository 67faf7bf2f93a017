#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sns/count_sketch.hpp"
#include "sns/errors.hpp"
#include "sns/heavy_hitters.hpp"
#include "sns/zipf.hpp"

namespace sns {

struct BenchSettings {
  std::uint64_t keys = 100000;
  double exponent = 1.1;
  std::uint64_t seed = 1;
  SketchConfig sketch{16, 200000, 42};
  std::size_t capacity = 2000;
  std::uint64_t chunk = 1 << 20;
};

struct BenchPoint {
  std::uint64_t updates = 0;
  double seconds = 0;
};

/// Times stream_ingest over a synthetic Zipf stream of `updates` keys.
/// Key generation happens in chunks outside the timed region.
inline BenchPoint bench_ingest(std::uint64_t updates, const BenchSettings& s) {
  ZipfGenerator gen(s.keys, s.exponent, s.seed);
  CountSketch sketch(s.sketch);
  TopKTracker tracker(s.capacity);
  std::vector<CellKey> buf;
  double seconds = 0;
  for (std::uint64_t done = 0; done < updates;) {
    const std::uint64_t n = std::min(s.chunk, updates - done);
    buf.clear();
    for (std::uint64_t i = 0; i < n; ++i) buf.push_back(gen.next());
    const auto t0 = std::chrono::steady_clock::now();
    stream_ingest(sketch, tracker, buf);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    done += n;
  }
  if (sketch.total_updates() != updates) throw Error("bench bookkeeping mismatch");
  return BenchPoint{updates, seconds};
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

/// Ordinary least squares of seconds on updates.
inline LinearFit fit_linear(std::span<const BenchPoint> pts) {
  if (pts.size() < 2) throw UsageError("a linear fit needs at least two points");
  const double n = static_cast<double>(pts.size());
  double sx = 0, sy = 0;
  for (const auto& p : pts) {
    sx += static_cast<double>(p.updates);
    sy += p.seconds;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : pts) {
    const double dx = static_cast<double>(p.updates) - mx, dy = p.seconds - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0) throw UsageError("a linear fit needs distinct stream sizes");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

}  // namespace sns
