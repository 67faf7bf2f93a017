#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sns/cell_key.hpp"
#include "sns/errors.hpp"
#include "sns/hash.hpp"

namespace sns {

/// Shape and hash seed of a sketch. Two sketches merge iff these match.
struct SketchConfig {
  std::uint32_t rows = 16;
  std::uint32_t cols = 200000;
  std::uint64_t seed = 0;

  void validate() const {
    if (rows == 0) throw UsageError("sketch rows must be >= 1");
    if (cols == 0) throw UsageError("sketch cols must be >= 1");
  }

  std::size_t counter_count() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }

  friend bool operator==(const SketchConfig&, const SketchConfig&) = default;
};

inline std::string describe(const SketchConfig& c) {
  return "rows=" + std::to_string(c.rows) + " cols=" + std::to_string(c.cols) +
         " seed=" + std::to_string(c.seed);
}

namespace detail {

// Per-call scratch of one slot per row; stack storage for the common case so
// concurrent readers never share a buffer.
template <typename T, typename Fn>
decltype(auto) with_row_scratch(std::size_t rows, Fn&& fn) {
  constexpr std::size_t kInline = 64;
  if (rows <= kInline) {
    std::array<T, kInline> buf;
    return fn(std::span<T>(buf.data(), rows));
  }
  std::vector<T> buf(rows);
  return fn(std::span<T>(buf));
}

// -INT64_MIN saturates to INT64_MAX.
constexpr std::int64_t signed_counter(std::int64_t c, int sign) noexcept {
  if (sign > 0) return c;
  return c == INT64_MIN ? INT64_MAX : -c;
}

inline std::int64_t median_truncated(std::span<std::int64_t> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (n % 2 == 1) return v[mid];
  const std::int64_t upper = v[mid];
  const std::int64_t lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  // __int128 keeps the sum exact; division truncates toward zero.
  return static_cast<std::int64_t>((static_cast<__int128>(lower) + upper) / 2);
}

inline long double median_real(std::span<long double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (n % 2 == 1) return v[mid];
  const long double upper = v[mid];
  const long double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2;
}

}  // namespace detail

/// Count Sketch: R rows of C signed counters, one bucket hash and one sign
/// hash per row.
///
/// Single writer. Concurrent estimate()/estimate_l2() calls are safe as long
/// as nobody is updating. Parallel ingestion is done with one sketch per
/// worker followed by merge(), which is exact.
class CountSketch {
 public:
  explicit CountSketch(const SketchConfig& config) : config_(config) {
    config_.validate();
    build_hashes();
    counters_.assign(config_.counter_count(), 0);
  }

  /// Rebuilds a sketch from stored state (used by deserialization).
  static CountSketch from_state(const SketchConfig& config, std::uint64_t total_updates,
                                std::vector<std::int64_t> counters) {
    CountSketch s(config, 0);
    if (counters.size() != config.counter_count()) {
      throw DataError("counter payload has " + std::to_string(counters.size()) + " values, expected " +
                      std::to_string(config.counter_count()));
    }
    s.counters_ = std::move(counters);
    s.total_updates_ = total_updates;
    return s;
  }

  const SketchConfig& config() const noexcept { return config_; }
  std::uint32_t rows() const noexcept { return config_.rows; }
  std::uint32_t cols() const noexcept { return config_.cols; }
  std::uint64_t total_updates() const noexcept { return total_updates_; }
  std::span<const std::int64_t> counters() const noexcept { return counters_; }
  std::span<const std::int64_t> row(std::uint32_t r) const {
    return std::span<const std::int64_t>(counters_).subspan(static_cast<std::size_t>(r) * cols(), cols());
  }
  const HashPair& hash(std::uint32_t r) const { return hashes_.at(r); }

  /// Bytes held by the counter table alone.
  std::size_t counter_bytes() const noexcept { return counters_.size() * sizeof(std::int64_t); }

  /// Adds sign_r(key)*delta to one counter per row. All-or-nothing: on
  /// overflow nothing is modified.
  void update(CellKey key, std::int64_t delta = 1) { apply(key, delta, nullptr); }

  /// update() followed by estimate(), hashing the key once.
  std::int64_t update_and_estimate(CellKey key, std::int64_t delta = 1) {
    std::int64_t result = 0;
    apply(key, delta, &result);
    return result;
  }

  /// Median over rows of sign_r(key) * counter[r][bucket_r(key)]. For even
  /// R the two central values are averaged, truncating toward zero.
  std::int64_t estimate(CellKey key) const {
    return detail::with_row_scratch<std::int64_t>(rows(), [&](std::span<std::int64_t> est) {
      for (std::uint32_t r = 0; r < rows(); ++r) {
        const std::uint64_t h = hashes_[r].raw(key);
        const std::int64_t c = counters_[offset(r, h % cols())];
        est[r] = detail::signed_counter(c, HashPair::sign_of_raw(h));
      }
      return detail::median_truncated(est);
    });
  }

  /// sqrt of the median over rows of the per-row sum of squared counters.
  double estimate_l2() const {
    return detail::with_row_scratch<long double>(rows(), [&](std::span<long double> sums) {
      for (std::uint32_t r = 0; r < rows(); ++r) {
        long double acc = 0;
        for (std::int64_t c : row(r)) {
          const long double x = static_cast<long double>(c);
          acc += x * x;
        }
        sums[r] = acc;
      }
      return static_cast<double>(std::sqrt(detail::median_real(sums)));
    });
  }

  /// Element-wise add of another sketch with the identical config.
  CountSketch& merge_from(const CountSketch& other) {
    if (!(config_ == other.config_)) {
      throw IncompatibleSketchError("cannot merge sketches with different configs (" + describe(config_) +
                                    " vs " + describe(other.config_) + ")");
    }
    std::uint64_t total = 0;
    if (__builtin_add_overflow(total_updates_, other.total_updates_, &total)) {
      throw CounterOverflowError("total_updates overflow during merge");
    }
    std::vector<std::int64_t> sum(counters_.size());
    for (std::size_t i = 0; i < counters_.size(); ++i) {
      if (__builtin_add_overflow(counters_[i], other.counters_[i], &sum[i])) {
        throw CounterOverflowError("counter overflow during merge at index " + std::to_string(i));
      }
    }
    counters_ = std::move(sum);
    total_updates_ = total;
    return *this;
  }

  friend bool operator==(const CountSketch& a, const CountSketch& b) {
    return a.config_ == b.config_ && a.total_updates_ == b.total_updates_ && a.counters_ == b.counters_;
  }

 private:
  CountSketch(const SketchConfig& config, int /*no_alloc*/) : config_(config) {
    config_.validate();
    build_hashes();
  }

  void build_hashes() {
    hashes_.clear();
    hashes_.reserve(config_.rows);
    for (std::uint32_t r = 0; r < config_.rows; ++r) hashes_.emplace_back(config_.seed, r);
  }

  std::size_t offset(std::uint32_t r, std::uint64_t bucket) const noexcept {
    return static_cast<std::size_t>(r) * cols() + static_cast<std::size_t>(bucket);
  }

  void apply(CellKey key, std::int64_t delta, std::int64_t* estimate_out) {
    if (total_updates_ == UINT64_MAX) throw CounterOverflowError("total_updates overflow");
    struct Slot {
      std::size_t index;
      std::int64_t value;
      int sign;
    };
    detail::with_row_scratch<Slot>(rows(), [&](std::span<Slot> slots) {
      for (std::uint32_t r = 0; r < rows(); ++r) {
        const std::uint64_t h = hashes_[r].raw(key);
        const int sign = HashPair::sign_of_raw(h);
        const std::size_t idx = offset(r, h % cols());
        std::int64_t step = 0;
        std::int64_t next = 0;
        if (__builtin_mul_overflow(delta, static_cast<std::int64_t>(sign), &step) ||
            __builtin_add_overflow(counters_[idx], step, &next)) {
          throw CounterOverflowError("counter overflow in row " + std::to_string(r) + " for key " +
                                     to_string(key));
        }
        slots[r] = Slot{idx, next, sign};
      }
      // A key may not land twice in one row, so commits never alias.
      for (const Slot& s : slots) counters_[s.index] = s.value;
      ++total_updates_;
      if (estimate_out != nullptr) {
        detail::with_row_scratch<std::int64_t>(rows(), [&](std::span<std::int64_t> est) {
          for (std::uint32_t r = 0; r < rows(); ++r) est[r] = detail::signed_counter(slots[r].value, slots[r].sign);
          *estimate_out = detail::median_truncated(est);
          return 0;
        });
      }
      return 0;
    });
  }

  SketchConfig config_;
  std::vector<HashPair> hashes_;
  std::vector<std::int64_t> counters_;
  std::uint64_t total_updates_ = 0;
};

/// Returns a + b. Throws IncompatibleSketchError on config mismatch.
inline CountSketch merge(const CountSketch& a, const CountSketch& b) {
  CountSketch out = a;
  out.merge_from(b);
  return out;
}

}  // namespace sns
