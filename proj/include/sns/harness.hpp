#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sns/config.hpp"
#include "sns/count_sketch.hpp"
#include "sns/heavy_hitters.hpp"
#include "sns/point_io.hpp"
#include "sns/quantizer.hpp"
#include "sns/sketch_io.hpp"

namespace sns {

/// Half-open row range [begin, end).
struct RowRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::uint64_t size() const noexcept { return end - begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

/// Contiguous ranges covering [0, rows); sizes differ by at most one with
/// the larger shards first. P > rows yields trailing empty shards.
inline std::vector<RowRange> partition_rows(std::uint64_t rows, std::size_t parts) {
  if (parts == 0) throw UsageError("partition count must be >= 1");
  std::vector<RowRange> out(parts);
  const std::uint64_t base = rows / parts;
  const std::uint64_t extra = rows % parts;
  std::uint64_t at = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const std::uint64_t n = base + (i < extra ? 1 : 0);
    out[i] = RowRange{at, at + n};
    at += n;
  }
  return out;
}

struct Shard {
  std::size_t id = 0;
  std::filesystem::path path;
  RowRange rows;
};

/// Shared, immutable description of a distributed run. Every worker uses the
/// same grid and the same sketch config (and therefore the same hashes).
struct ShardManifest {
  std::filesystem::path input;
  PointFormat format = PointFormat::csv;
  std::uint64_t total_rows = 0;
  GridSpec grid;
  SketchConfig sketch;
  PreprocessOptions preprocess;
  std::size_t candidate_budget = 1;
  std::vector<Shard> shards;

  std::size_t partitions() const noexcept { return shards.size(); }

  void validate() const {
    sketch.validate();
    if (shards.empty()) throw UsageError("manifest has no shards");
    if (candidate_budget == 0) throw UsageError("manifest candidate budget must be >= 1");
    std::uint64_t at = 0;
    for (std::size_t i = 0; i < shards.size(); ++i) {
      if (shards[i].id != i) throw UsageError("manifest shard ids must be 0..P-1 in order");
      if (shards[i].rows.begin != at || shards[i].rows.end < shards[i].rows.begin) {
        throw UsageError("manifest shard " + std::to_string(i) + " row range is not contiguous");
      }
      at = shards[i].rows.end;
    }
    if (at != total_rows) throw UsageError("manifest shards do not cover all input rows");
  }
};

inline ShardManifest partition(const std::filesystem::path& input, PointFormat format, std::uint64_t total_rows,
                               std::size_t parts, GridSpec grid, SketchConfig sketch, PreprocessOptions preprocess,
                               std::size_t candidate_budget) {
  ShardManifest m{input, format, total_rows, std::move(grid), sketch, preprocess, candidate_budget, {}};
  const auto ranges = partition_rows(total_rows, parts);
  for (std::size_t i = 0; i < ranges.size(); ++i) m.shards.push_back(Shard{i, input, ranges[i]});
  m.validate();
  return m;
}

/// Probes the input for its row count, then partitions it.
inline ShardManifest partition(const std::filesystem::path& input, PointFormat format, std::size_t parts,
                               GridSpec grid, SketchConfig sketch, PreprocessOptions preprocess,
                               std::size_t candidate_budget) {
  const auto info = probe_points(input, format);
  return partition(input, format, info.rows, parts, std::move(grid), sketch, preprocess, candidate_budget);
}

inline json to_json(const ShardManifest& m) {
  json shards = json::array();
  for (const auto& s : m.shards) {
    shards.push_back({{"id", s.id},
                      {"path", s.path.string()},
                      {"row_begin", s.rows.begin},
                      {"row_end", s.rows.end},
                      {"rows", s.rows.size()}});
  }
  return json{{"version", 1},
              {"input", {{"path", m.input.string()}, {"format", to_string(m.format)}}},
              {"total_rows", m.total_rows},
              {"partitions", m.partitions()},
              {"grid", to_json(m.grid)},
              {"sketch", to_json(m.sketch)},
              {"preprocess", to_json(m.preprocess)},
              {"candidate_budget", m.candidate_budget},
              {"shards", shards}};
}

inline ShardManifest manifest_from_json(const json& j) {
  try {
    if (j.value("version", 0) != 1) throw UsageError("manifest: unsupported version");
    ShardManifest m{j.at("input").at("path").get<std::string>(),
                    parse_point_format(j.at("input").at("format").get<std::string>()),
                    j.at("total_rows").get<std::uint64_t>(),
                    grid_from_json(j.at("grid")),
                    sketch_config_from_json(j.at("sketch")),
                    preprocess_from_json(j.at("preprocess")),
                    j.at("candidate_budget").get<std::size_t>(),
                    {}};
    for (const auto& s : j.at("shards")) {
      m.shards.push_back(Shard{s.at("id").get<std::size_t>(), s.at("path").get<std::string>(),
                               RowRange{s.at("row_begin").get<std::uint64_t>(), s.at("row_end").get<std::uint64_t>()}});
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }
}

struct WorkerStats {
  std::uint64_t rows_read = 0;
  std::uint64_t points_kept = 0;
  std::uint64_t clamped = 0;
};

/// In-memory product of one worker: its sketch, its candidate tracker and
/// bookkeeping.
struct WorkerState {
  CountSketch sketch;
  TopKTracker tracker;
  WorkerStats stats;
};

/// preprocess -> quantize -> encode -> stream_ingest over the shard's rows.
/// Data errors are rethrown with the shard id and row number attached.
inline WorkerState run_shard(const Shard& shard, const ShardManifest& m) {
  WorkerState w{CountSketch(m.sketch), TopKTracker(m.candidate_budget), {}};
  Quantizer quantizer(m.grid);
  std::uint64_t current_row = shard.rows.begin;
  try {
    for_each_point(shard.path, m.format, m.grid.dims(), shard.rows.begin, shard.rows.end,
                   [&](std::uint64_t row, std::span<const double> p) {
                     current_row = row;
                     ++w.stats.rows_read;
                     const auto kept = apply_preprocess(p, m.preprocess);
                     if (!kept) return;
                     ++w.stats.points_kept;
                     ingest_one(w.sketch, w.tracker, encode(quantizer(*kept), m.grid));
                   });
  } catch (const DataError& e) {
    throw DataError("shard " + std::to_string(shard.id) + ", row " + std::to_string(current_row) + ": " + e.what());
  }
  w.stats.clamped = quantizer.clamped();
  return w;
}

struct WorkerOutput {
  std::filesystem::path sketch_file;
  std::filesystem::path candidate_file;
  WorkerStats stats;
};

inline std::filesystem::path shard_sketch_path(const std::filesystem::path& dir, std::size_t id) {
  return dir / ("shard-" + std::to_string(id) + ".snsk");
}

inline std::filesystem::path shard_candidate_path(const std::filesystem::path& dir, std::size_t id) {
  return dir / ("shard-" + std::to_string(id) + ".snhh");
}

/// Runs one shard and ships its SNSK sketch and SNHH candidate list.
inline WorkerOutput worker_run(const Shard& shard, const ShardManifest& m, const std::filesystem::path& out_dir) {
  const WorkerState w = run_shard(shard, m);
  WorkerOutput out{shard_sketch_path(out_dir, shard.id), shard_candidate_path(out_dir, shard.id), w.stats};
  write_sketch_file(out.sketch_file, w.sketch);
  write_heavy_hitters_binary(out.candidate_file, w.tracker.ranked());
  return out;
}

/// Runs every shard on up to `jobs` threads. Results are indexed by shard id,
/// so output never depends on scheduling. The lowest-id failure is rethrown.
inline std::vector<WorkerOutput> run_workers(const ShardManifest& m, const std::filesystem::path& out_dir,
                                             std::size_t jobs) {
  const std::size_t n = m.shards.size();
  std::vector<WorkerOutput> outputs(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        outputs[i] = worker_run(m.shards[i], m, out_dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outputs;
}

/// Balanced binary merge tree over P leaves. Leaves are ids [0, P);
/// internal nodes get ids P, P+1, ... in evaluation (post-)order.
class MergePlan {
 public:
  struct Step {
    std::size_t left;
    std::size_t right;
    std::size_t output;
  };

  explicit MergePlan(std::size_t leaves) : leaves_(leaves) {
    if (leaves_ == 0) throw UsageError("merge plan needs at least one sketch");
    root_ = build(0, leaves_, 0);
  }

  std::size_t leaves() const noexcept { return leaves_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t merges() const noexcept { return steps_.size(); }
  std::size_t root() const noexcept { return root_; }
  const std::vector<Step>& steps() const noexcept { return steps_; }

  /// Evaluates the plan; load(i) produces leaf i. Only the sketches on the
  /// current root-to-leaf path are held at once.
  CountSketch evaluate(const std::function<CountSketch(std::size_t)>& load) const {
    return eval(0, leaves_, load);
  }

 private:
  std::size_t build(std::size_t lo, std::size_t hi, std::size_t level) {
    depth_ = std::max(depth_, level);
    if (hi - lo == 1) return lo;
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    const std::size_t l = build(lo, mid, level + 1);
    const std::size_t r = build(mid, hi, level + 1);
    steps_.push_back(Step{l, r, leaves_ + steps_.size()});
    return steps_.back().output;
  }

  CountSketch eval(std::size_t lo, std::size_t hi, const std::function<CountSketch(std::size_t)>& load) const {
    if (hi - lo == 1) return load(lo);
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    CountSketch left = eval(lo, mid, load);
    left.merge_from(eval(mid, hi, load));
    return left;
  }

  std::size_t leaves_;
  std::size_t depth_ = 0;
  std::size_t root_ = 0;
  std::vector<Step> steps_;
};

inline CountSketch tree_merge(std::span<const CountSketch> sketches) {
  const MergePlan plan(sketches.size());
  return plan.evaluate([&](std::size_t i) { return sketches[i]; });
}

/// Sequential left fold, ((s0 + s1) + s2) + ...
inline CountSketch fold_merge(std::span<const CountSketch> sketches) {
  if (sketches.empty()) throw UsageError("nothing to merge");
  CountSketch acc = sketches.front();
  for (std::size_t i = 1; i < sketches.size(); ++i) acc.merge_from(sketches[i]);
  return acc;
}

/// Tree-merges sketch files. A config mismatch names the offending file.
inline CountSketch tree_merge(std::span<const std::filesystem::path> files, const MergePlan& plan) {
  if (files.size() != plan.leaves()) throw UsageError("merge plan size does not match the number of files");
  std::optional<SketchConfig> reference;
  return plan.evaluate([&](std::size_t i) {
    CountSketch s = read_sketch_file(files[i]);
    if (!reference) {
      reference = s.config();
    } else if (!(s.config() == *reference)) {
      throw IncompatibleSketchError(files[i].string() + ": sketch config (" + describe(s.config()) +
                                    ") differs from " + files[0].string() + " (" + describe(*reference) + ")");
    }
    return s;
  });
}

inline CountSketch tree_merge(std::span<const std::filesystem::path> files) {
  return tree_merge(files, MergePlan(files.size()));
}

/// Union of candidate keys from several SNHH files.
inline std::vector<CellKey> union_candidates(std::span<const std::filesystem::path> files) {
  std::vector<CellKey> keys;
  for (const auto& f : files) {
    for (const auto& h : read_heavy_hitters_binary(f)) keys.push_back(h.key);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

}  // namespace sns
