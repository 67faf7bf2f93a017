#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sns/binary_io.hpp"
#include "sns/cell_key.hpp"
#include "sns/count_sketch.hpp"
#include "sns/errors.hpp"

namespace sns {

struct HeavyHitter {
  CellKey key;
  std::int64_t freq = 0;
  std::uint64_t rank = 0;  // 1 = most frequent

  friend bool operator==(const HeavyHitter&, const HeavyHitter&) = default;
};

/// Ordering used everywhere a ranked list is produced: estimate descending,
/// then key ascending.
inline bool ranks_before(CellKey ka, std::int64_t fa, CellKey kb, std::int64_t fb) {
  if (fa != fb) return fa > fb;
  return ka < kb;
}

/// Bounded candidate set: an indexed binary min-heap on estimate plus a
/// key -> heap slot index. Among equal estimates the larger key sits closer
/// to the root, so evictions agree with the final ranking's tie-break.
class TopKTracker {
 public:
  struct Entry {
    CellKey key;
    std::int64_t estimate;
  };

  explicit TopKTracker(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw UsageError("tracker capacity must be >= 1");
    heap_.reserve(capacity_);
    slot_.reserve(capacity_ * 2);
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return heap_.size(); }
  bool empty() const noexcept { return heap_.empty(); }
  bool contains(CellKey k) const { return slot_.count(k) != 0; }

  /// Stored estimate of a tracked key; throws if absent.
  std::int64_t stored(CellKey k) const { return heap_[slot_.at(k)].estimate; }

  const Entry& min_entry() const {
    if (heap_.empty()) throw UsageError("min_entry() on an empty tracker");
    return heap_.front();
  }

  /// Upserts (key, estimate). A tracked key's estimate only ever rises. An
  /// untracked key enters if there is room or it beats the current minimum.
  void offer(CellKey key, std::int64_t estimate) {
    if (auto it = slot_.find(key); it != slot_.end()) {
      Entry& e = heap_[it->second];
      if (estimate > e.estimate) {
        e.estimate = estimate;
        sift_down(it->second);
      }
      return;
    }
    if (heap_.size() < capacity_) {
      heap_.push_back(Entry{key, estimate});
      slot_.emplace(key, heap_.size() - 1);
      sift_up(heap_.size() - 1);
      return;
    }
    if (estimate > heap_.front().estimate) {
      slot_.erase(heap_.front().key);
      heap_.front() = Entry{key, estimate};
      slot_.emplace(key, 0);
      sift_down(0);
    }
  }

  std::vector<CellKey> keys() const {
    std::vector<CellKey> out;
    out.reserve(heap_.size());
    for (const auto& e : heap_) out.push_back(e.key);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Entries ranked by stored estimate (descending, key ascending).
  std::vector<HeavyHitter> ranked() const {
    std::vector<HeavyHitter> out;
    out.reserve(heap_.size());
    for (const auto& e : heap_) out.push_back(HeavyHitter{e.key, e.estimate, 0});
    std::sort(out.begin(), out.end(),
              [](const HeavyHitter& a, const HeavyHitter& b) { return ranks_before(a.key, a.freq, b.key, b.freq); });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
    return out;
  }

 private:
  // true if a belongs above b in the min-heap
  static bool lower(const Entry& a, const Entry& b) {
    if (a.estimate != b.estimate) return a.estimate < b.estimate;
    return a.key > b.key;
  }

  void place(std::size_t i, Entry e) {
    heap_[i] = e;
    slot_[e.key] = i;
  }

  void sift_up(std::size_t i) {
    Entry e = heap_[i];
    while (i > 0) {
      const std::size_t parent = (i - 1) / 2;
      if (!lower(e, heap_[parent])) break;
      place(i, heap_[parent]);
      i = parent;
    }
    place(i, e);
  }

  void sift_down(std::size_t i) {
    Entry e = heap_[i];
    const std::size_t n = heap_.size();
    while (true) {
      std::size_t child = 2 * i + 1;
      if (child >= n) break;
      if (child + 1 < n && lower(heap_[child + 1], heap_[child])) ++child;
      if (!lower(heap_[child], e)) break;
      place(i, heap_[child]);
      i = child;
    }
    place(i, e);
  }

  std::size_t capacity_;
  std::vector<Entry> heap_;
  std::unordered_map<CellKey, std::size_t> slot_;
};

/// For each key: update the sketch, then offer the fresh estimate.
template <typename Keys>
void stream_ingest(CountSketch& sketch, TopKTracker& tracker, const Keys& keys) {
  for (CellKey k : keys) tracker.offer(k, sketch.update_and_estimate(k));
}

inline void ingest_one(CountSketch& sketch, TopKTracker& tracker, CellKey key) {
  tracker.offer(key, sketch.update_and_estimate(key));
}

/// Re-estimates the de-duplicated candidates on `sketch`, ranks them and
/// keeps the top k (all of them if there are fewer).
inline std::vector<HeavyHitter> finalize(std::span<const CellKey> candidates, const CountSketch& sketch,
                                         std::size_t k) {
  if (k == 0) throw UsageError("top-k must be >= 1");
  std::vector<CellKey> unique(candidates.begin(), candidates.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<HeavyHitter> out;
  out.reserve(unique.size());
  for (CellKey key : unique) out.push_back(HeavyHitter{key, sketch.estimate(key), 0});
  std::sort(out.begin(), out.end(),
            [](const HeavyHitter& a, const HeavyHitter& b) { return ranks_before(a.key, a.freq, b.key, b.freq); });
  if (out.size() > k) out.resize(k);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

// SNHH layout: "SNHH" | u16 version=1 | u64 count |
//              count x (u64 rank, u64 key_lo, u64 key_hi, i64 freq)
inline constexpr char kHeavyHitterMagic[5] = "SNHH";
inline constexpr std::uint16_t kHeavyHitterVersion = 1;

inline std::vector<std::uint8_t> serialize_heavy_hitters(std::span<const HeavyHitter> list) {
  ByteWriter w;
  w.tag(kHeavyHitterMagic);
  w.u16(kHeavyHitterVersion);
  w.u64(list.size());
  for (const auto& h : list) {
    w.u64(h.rank);
    w.u64(h.key.lo());
    w.u64(h.key.hi());
    w.i64(h.freq);
  }
  return w.take();
}

inline std::vector<HeavyHitter> deserialize_heavy_hitters(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "heavy-hitter file");
  if (!r.tag_matches(kHeavyHitterMagic)) throw BadMagicError("not a heavy-hitter file (bad magic)");
  const auto version = r.u16();
  if (version != kHeavyHitterVersion) {
    throw VersionMismatchError("unsupported heavy-hitter file version " + std::to_string(version));
  }
  const std::uint64_t count = r.u64();
  if (count > r.remaining() / 32) throw TruncatedError("heavy-hitter file truncated: declares " + std::to_string(count) + " entries");
  std::vector<HeavyHitter> out(count);
  for (auto& h : out) {
    h.rank = r.u64();
    const std::uint64_t lo = r.u64();
    const std::uint64_t hi = r.u64();
    h.key = CellKey::from_parts(hi, lo);
    h.freq = r.i64();
  }
  if (r.remaining() != 0) throw FormatError("heavy-hitter file has trailing bytes");
  return out;
}

inline void write_heavy_hitters_binary(const std::filesystem::path& path, std::span<const HeavyHitter> list) {
  AtomicFile f(path);
  f.write(serialize_heavy_hitters(list));
  f.commit();
}

inline std::vector<HeavyHitter> read_heavy_hitters_binary(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return deserialize_heavy_hitters(bytes);
  } catch (const FormatError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_heavy_hitters_csv(const std::filesystem::path& path, std::span<const HeavyHitter> list) {
  AtomicFile f(path);
  auto& out = f.stream();
  out << "rank,key,freq\n";
  for (const auto& h : list) out << h.rank << ',' << to_string(h.key) << ',' << h.freq << '\n';
  f.commit();
}

inline std::vector<HeavyHitter> read_heavy_hitters_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty heavy-hitter CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "rank,key,freq") throw DataError(path.string() + ": expected header 'rank,key,freq'");
  std::vector<HeavyHitter> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw DataError(path.string() + ": line " + std::to_string(line_no) + " malformed");
    try {
      HeavyHitter h;
      std::size_t used = 0;
      const std::string rank_s = line.substr(0, c1);
      const std::string freq_s = line.substr(c2 + 1);
      h.rank = std::stoull(rank_s, &used);
      if (used != rank_s.size()) throw std::invalid_argument("rank");
      h.key = parse_cell_key(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
      h.freq = std::stoll(freq_s, &used);
      if (used != freq_s.size()) throw std::invalid_argument("freq");
      out.push_back(h);
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " malformed");
    }
  }
  return out;
}

/// Checks ranks are 1..K without gaps and freq is non-increasing.
inline void validate_ranked(std::span<const HeavyHitter> list) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].rank != i + 1) throw DataError("heavy-hitter ranks are not 1..K in order");
    if (i > 0 && list[i].freq > list[i - 1].freq) throw DataError("heavy-hitter frequencies increase with rank");
  }
}

}  // namespace sns
