#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sns/config.hpp"
#include "sns/harness.hpp"
#include "sns/heavy_hitters.hpp"
#include "sns/summary.hpp"

namespace sns {

/// Norm at the given percentile over the first `sample_rows` input rows.
inline double threshold_from_percentile(const std::filesystem::path& input, PointFormat format, std::size_t dims,
                                        double percentile, std::uint64_t sample_rows = 1000000) {
  std::vector<double> norms;
  for_each_point(input, format, dims, 0, sample_rows, [&](std::uint64_t, std::span<const double> p) {
    require_finite(p);
    norms.push_back(euclidean_norm(p));
  });
  if (norms.empty()) throw DataError("cannot derive a threshold from an empty input");
  const auto idx = static_cast<std::size_t>(percentile / 100.0 * static_cast<double>(norms.size() - 1));
  std::nth_element(norms.begin(), norms.begin() + static_cast<std::ptrdiff_t>(idx), norms.end());
  return norms[idx];
}

/// Resolves thresholds and bounds (fitting them to the preprocessed data if
/// requested) into the concrete grid and preprocessing every worker shares.
struct ResolvedInput {
  PointFormat format;
  PointFileInfo info;
  PreprocessOptions preprocess;
  GridSpec grid;
};

inline ResolvedInput resolve_input(const PipelineConfig& cfg) {
  cfg.validate();
  const PointFormat format = cfg.point_format();
  const PointFileInfo info = probe_points(cfg.input, format);
  if (cfg.dims != 0 && info.rows > 0 && info.dims != cfg.dims) {
    throw DataError(cfg.input.string() + ": input has " + std::to_string(info.dims) + " dims, config says " +
                    std::to_string(cfg.dims));
  }
  const std::size_t dims = cfg.dims != 0 ? cfg.dims : info.dims;
  if (dims == 0) throw DataError(cfg.input.string() + ": cannot infer dimensions from an empty input");

  PreprocessOptions pre{cfg.threshold, cfg.normalize};
  if (cfg.threshold_percentile) {
    pre.threshold = threshold_from_percentile(cfg.input, format, dims, *cfg.threshold_percentile);
  }

  BoundingBox box;
  if (cfg.bounds) {
    box = *cfg.bounds;
    if (box.dims() != dims) throw UsageError("bounds have " + std::to_string(box.dims()) + " dims, input has " +
                                             std::to_string(dims));
  } else {
    BoundsAccumulator acc;
    for_each_point(cfg.input, format, dims, 0, UINT64_MAX, [&](std::uint64_t row, std::span<const double> p) {
      try {
        if (auto kept = apply_preprocess(p, pre)) acc.add(*kept);
      } catch (const DataError& e) {
        throw DataError("row " + std::to_string(row) + ": " + e.what());
      }
    });
    box = acc.finish();
  }
  return ResolvedInput{format, info, pre, GridSpec(std::move(box), cfg.bins)};
}

inline ShardManifest plan_run(const PipelineConfig& cfg) {
  const auto resolved = resolve_input(cfg);
  return partition(cfg.input, resolved.format, resolved.info.rows, cfg.partitions, resolved.grid, cfg.sketch,
                   resolved.preprocess, cfg.candidate_budget());
}

struct PipelineOutputs {
  std::filesystem::path manifest;
  std::filesystem::path grid;
  std::filesystem::path merged_sketch;
  std::filesystem::path topk_csv;
  std::filesystem::path topk_binary;
  std::filesystem::path summary_csv;
};

inline PipelineOutputs pipeline_outputs(const std::filesystem::path& dir) {
  return PipelineOutputs{dir / "manifest.json", dir / "grid.json",   dir / "merged.snsk",
                         dir / "topk.csv",      dir / "topk.snhh",   dir / "summary.csv"};
}

struct PipelineResult {
  ShardManifest manifest;
  CountSketch merged;
  std::vector<HeavyHitter> top;
  std::size_t summary_points = 0;
  WorkerStats totals;
  PipelineOutputs files;
};

/// grid -> per-shard sketches and candidates -> tree merge -> re-estimated
/// top-K -> replicated, jittered summary. Every artifact lands in
/// cfg.output_dir.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  const ShardManifest manifest = plan_run(cfg);
  const auto files = pipeline_outputs(cfg.output_dir);
  const auto work = cfg.output_dir / "work";
  std::filesystem::create_directories(work);
  write_json_file(files.manifest, to_json(manifest));
  write_json_file(files.grid, to_json(manifest.grid));

  const auto outputs = run_workers(manifest, work, cfg.jobs);
  WorkerStats totals;
  std::vector<std::filesystem::path> sketch_files;
  std::vector<std::filesystem::path> candidate_files;
  for (const auto& o : outputs) {
    totals.rows_read += o.stats.rows_read;
    totals.points_kept += o.stats.points_kept;
    totals.clamped += o.stats.clamped;
    sketch_files.push_back(o.sketch_file);
    candidate_files.push_back(o.candidate_file);
  }

  const MergePlan plan(sketch_files.size());
  CountSketch merged = tree_merge(sketch_files, plan);
  write_sketch_file(files.merged_sketch, merged);

  const auto candidates = union_candidates(candidate_files);
  std::vector<HeavyHitter> top = finalize(candidates, merged, cfg.top_k);
  write_heavy_hitters_csv(files.topk_csv, top);
  write_heavy_hitters_binary(files.topk_binary, top);

  std::size_t summary_points = 0;
  if (!top.empty()) {
    const auto summary = expand(top, manifest.grid, cfg.scheme, cfg.jitter_seed);
    write_summary_csv(files.summary_csv, manifest.grid.dims(), summary);
    summary_points = summary.size();
  } else {
    write_summary_csv(files.summary_csv, manifest.grid.dims(), {});
  }

  if (log != nullptr) {
    *log << "rows " << totals.rows_read << ", kept " << totals.points_kept << ", clamped " << totals.clamped << '\n'
         << "partitions " << manifest.partitions() << ", merges " << plan.merges() << ", depth " << plan.depth()
         << '\n'
         << "candidates " << candidates.size() << ", top-k " << top.size() << ", summary points " << summary_points
         << '\n';
  }
  return PipelineResult{manifest, std::move(merged), std::move(top), summary_points, totals, files};
}

}  // namespace sns
