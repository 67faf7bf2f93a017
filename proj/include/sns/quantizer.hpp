#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sns/cell_key.hpp"
#include "sns/errors.hpp"

namespace sns {

/// Axis-aligned box enclosing the data; lo[d] < hi[d] on every axis.
struct BoundingBox {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const noexcept { return lo.size(); }

  void validate() const {
    if (lo.empty()) throw UsageError("bounding box needs at least one dimension");
    if (lo.size() != hi.size()) throw UsageError("bounding box lo/hi have different lengths");
    for (std::size_t d = 0; d < lo.size(); ++d) {
      if (!std::isfinite(lo[d]) || !std::isfinite(hi[d])) {
        throw UsageError("bounding box axis " + std::to_string(d) + " is not finite");
      }
      if (!(lo[d] < hi[d])) throw UsageError("bounding box axis " + std::to_string(d) + " has lo >= hi");
    }
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Regular grid of M bins per axis over a bounding box. Construction fails
/// unless every key M^D - 1 fits in 128 bits.
class GridSpec {
 public:
  GridSpec(BoundingBox box, std::uint32_t bins_per_axis) : box_(std::move(box)), bins_(bins_per_axis) {
    box_.validate();
    if (bins_ < 2) throw UsageError("bins per axis must be >= 2");
    const std::size_t dims = box_.dims();
    constexpr u128 kMax = ~static_cast<u128>(0);
    radix_.resize(dims);
    u128 p = 1;
    for (std::size_t d = 0; d < dims; ++d) {
      radix_[d] = p;
      if (d + 1 < dims) {
        if (p > kMax / bins_) throw UsageError(radix_overflow_message());
        p *= bins_;
      }
    }
    // p == M^(D-1). Require M^D <= 2^128, i.e. p <= floor(2^128 / M).
    u128 limit = kMax / bins_;
    if (kMax % bins_ == bins_ - 1) ++limit;  // M divides 2^128
    if (p > limit) throw UsageError(radix_overflow_message());
    // M^D - 1 == p*(M-1) + (p-1), each term representable.
    max_key_ = p * (bins_ - 1) + (p - 1);

    width_.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      width_[d] = (box_.hi[d] - box_.lo[d]) / bins_;
      if (!(width_[d] > 0)) throw UsageError("cell width on axis " + std::to_string(d) + " is not positive");
    }
  }

  const BoundingBox& box() const noexcept { return box_; }
  std::size_t dims() const noexcept { return box_.dims(); }
  std::uint32_t bins() const noexcept { return bins_; }
  double width(std::size_t d) const { return width_[d]; }
  std::span<const double> widths() const noexcept { return width_; }
  /// M^d for d in [0, D).
  u128 radix(std::size_t d) const { return radix_[d]; }
  /// Largest valid key, M^D - 1.
  CellKey max_key() const noexcept { return CellKey{max_key_}; }
  /// log10 of the total cell count V = M^D.
  double log10_cell_count() const { return static_cast<double>(dims()) * std::log10(static_cast<double>(bins_)); }

  friend bool operator==(const GridSpec& a, const GridSpec& b) { return a.bins_ == b.bins_ && a.box_ == b.box_; }

 private:
  std::string radix_overflow_message() const {
    return "grid of " + std::to_string(bins_) + "^" + std::to_string(box_.dims()) +
           " cells does not fit a 128-bit key";
  }

  BoundingBox box_;
  std::uint32_t bins_;
  std::vector<u128> radix_;
  std::vector<double> width_;
  u128 max_key_ = 0;
};

struct PreprocessOptions {
  std::optional<double> threshold;  // discard points with norm <= threshold
  bool normalize = false;           // scale survivors to unit norm
};

inline void require_finite(std::span<const double> point) {
  for (std::size_t d = 0; d < point.size(); ++d) {
    if (!std::isfinite(point[d])) throw DataError("non-finite coordinate on axis " + std::to_string(d));
  }
}

inline double euclidean_norm(std::span<const double> point) {
  double acc = 0;
  for (double x : point) acc += x * x;
  return std::sqrt(acc);
}

/// Optional thresholding on the Euclidean norm followed by optional
/// normalization. Returns nullopt when the point is discarded.
inline std::optional<std::vector<double>> apply_preprocess(std::span<const double> point,
                                                           const PreprocessOptions& opts) {
  require_finite(point);
  if (opts.threshold && !(*opts.threshold >= 0)) throw UsageError("threshold must be >= 0");
  const double norm = euclidean_norm(point);
  if (opts.threshold && norm <= *opts.threshold) return std::nullopt;
  std::vector<double> out(point.begin(), point.end());
  if (opts.normalize) {
    if (norm == 0) return std::nullopt;
    for (double& x : out) x /= norm;
  }
  return out;
}

/// Drops points with norm <= threshold and returns the rest as unit vectors.
inline std::optional<std::vector<double>> preprocess(std::span<const double> point, double threshold) {
  return apply_preprocess(point, PreprocessOptions{threshold, true});
}

/// Streaming min/max accumulator behind fit_bounds().
class BoundsAccumulator {
 public:
  static constexpr double kRelativeMargin = 1e-9;

  void add(std::span<const double> point) {
    require_finite(point);
    if (count_ == 0) {
      lo_.assign(point.begin(), point.end());
      hi_.assign(point.begin(), point.end());
    } else {
      if (point.size() != lo_.size()) throw DataError("point dimension mismatch while fitting bounds");
      for (std::size_t d = 0; d < point.size(); ++d) {
        lo_[d] = std::min(lo_[d], point[d]);
        hi_[d] = std::max(hi_[d], point[d]);
      }
    }
    ++count_;
  }

  std::uint64_t count() const noexcept { return count_; }

  /// Min/max widened by a relative margin so the max point lands inside the
  /// last bin rather than on its upper edge.
  BoundingBox finish() const {
    if (count_ == 0) throw DataError("cannot fit bounds to an empty input");
    BoundingBox box{lo_, hi_};
    for (std::size_t d = 0; d < lo_.size(); ++d) {
      const double range = hi_[d] - lo_[d];
      if (!(range > 0)) throw DataError("degenerate axis " + std::to_string(d) + ": all values equal " +
                                        std::to_string(lo_[d]));
      const double scale = std::max(std::abs(lo_[d]), std::abs(hi_[d]));
      const double margin = std::max(kRelativeMargin * range, 4 * std::numeric_limits<double>::epsilon() * scale);
      box.lo[d] -= margin;
      box.hi[d] += margin;
    }
    return box;
  }

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::uint64_t count_ = 0;
};

template <typename Points>
BoundingBox fit_bounds(const Points& points) {
  BoundsAccumulator acc;
  for (const auto& p : points) acc.add(std::span<const double>(p.data(), p.size()));
  return acc.finish();
}

/// Writes bin indices for `point` into `out`; returns true if any axis was
/// clamped into an edge bin.
inline bool quantize_into(std::span<const double> point, const GridSpec& grid, std::span<std::uint32_t> out) {
  if (point.size() != grid.dims() || out.size() != grid.dims()) {
    throw DataError("point has " + std::to_string(point.size()) + " coordinates, grid expects " +
                    std::to_string(grid.dims()));
  }
  const auto& box = grid.box();
  const double top = static_cast<double>(grid.bins() - 1);
  bool clamped = false;
  for (std::size_t d = 0; d < point.size(); ++d) {
    if (!std::isfinite(point[d])) throw DataError("non-finite coordinate on axis " + std::to_string(d));
    const double t = std::floor((point[d] - box.lo[d]) / grid.width(d));
    if (t < 0) {
      out[d] = 0;
      clamped = true;
    } else if (t > top) {
      out[d] = grid.bins() - 1;
      clamped = true;
    } else {
      out[d] = static_cast<std::uint32_t>(t);
    }
  }
  return clamped;
}

inline std::vector<std::uint32_t> quantize(std::span<const double> point, const GridSpec& grid,
                                           bool* clamped = nullptr) {
  std::vector<std::uint32_t> q(grid.dims());
  const bool c = quantize_into(point, grid, q);
  if (clamped != nullptr) *clamped = c;
  return q;
}

/// quantize() plus the per-worker count of clamped (out-of-box) points.
class Quantizer {
 public:
  explicit Quantizer(GridSpec grid) : grid_(std::move(grid)), scratch_(grid_.dims()) {}

  std::span<const std::uint32_t> operator()(std::span<const double> point) {
    if (quantize_into(point, grid_, scratch_)) ++clamped_;
    return scratch_;
  }

  const GridSpec& grid() const noexcept { return grid_; }
  std::uint64_t clamped() const noexcept { return clamped_; }

 private:
  GridSpec grid_;
  std::vector<std::uint32_t> scratch_;
  std::uint64_t clamped_ = 0;
};

/// Mixed-radix key: sum over d of q[d] * M^d.
inline CellKey encode(std::span<const std::uint32_t> q, const GridSpec& grid) {
  if (q.size() != grid.dims()) throw DomainError("bin vector length does not match grid dimensions");
  u128 v = 0;
  for (std::size_t d = q.size(); d-- > 0;) {
    if (q[d] >= grid.bins()) {
      throw DomainError("bin index " + std::to_string(q[d]) + " on axis " + std::to_string(d) +
                        " outside [0, " + std::to_string(grid.bins()) + ")");
    }
    v = v * grid.bins() + q[d];
  }
  return CellKey{v};
}

inline std::vector<std::uint32_t> decode(CellKey key, const GridSpec& grid) {
  if (key > grid.max_key()) throw DomainError("key " + to_string(key) + " exceeds the grid radix range");
  std::vector<std::uint32_t> q(grid.dims());
  u128 v = key.value;
  for (std::size_t d = 0; d < q.size(); ++d) {
    q[d] = static_cast<std::uint32_t>(v % grid.bins());
    v /= grid.bins();
  }
  return q;
}

inline std::vector<double> cell_center(std::span<const std::uint32_t> q, const GridSpec& grid) {
  if (q.size() != grid.dims()) throw DomainError("bin vector length does not match grid dimensions");
  std::vector<double> c(q.size());
  for (std::size_t d = 0; d < q.size(); ++d) {
    if (q[d] >= grid.bins()) throw DomainError("bin index outside grid on axis " + std::to_string(d));
    c[d] = grid.box().lo[d] + (static_cast<double>(q[d]) + 0.5) * grid.width(d);
  }
  return c;
}

}  // namespace sns
