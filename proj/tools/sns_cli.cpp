// sns: sketch-and-summarize command line.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 config mismatch.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sns/sns.hpp"

namespace fs = std::filesystem;

namespace {

// Flags that override fields of a PipelineConfig.
struct ConfigFlags {
  std::string config_file;
  std::string input;
  std::string format;
  std::size_t dims = 0;
  std::uint32_t bins = 0;
  std::vector<double> lo, hi;
  double threshold = 0;
  double threshold_percentile = 0;
  bool normalize = false;
  std::uint32_t rows = 0, cols = 0;
  std::uint64_t seed = 0;
  std::size_t k = 0, multiplier = 0;
  std::string scheme;
  std::uint64_t jitter_seed = 0;
  std::size_t partitions = 0, jobs = 0;
  std::string out_dir;

  CLI::Option* threshold_opt = nullptr;
  CLI::Option* percentile_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jitter_opt = nullptr;
  CLI::Option* normalize_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON pipeline config");
    app->add_option("--input", input, "input points (CSV or SNSD binary)");
    app->add_option("--format", format, "csv | binary | auto");
    app->add_option("-D,--dims", dims, "point dimension (0 = from input)");
    app->add_option("-M,--bins", bins, "bins per axis");
    app->add_option("--lo", lo, "explicit lower bounds")->delimiter(',');
    app->add_option("--hi", hi, "explicit upper bounds")->delimiter(',');
    threshold_opt = app->add_option("--threshold", threshold, "discard points with norm <= threshold");
    percentile_opt = app->add_option("--threshold-percentile", threshold_percentile, "threshold at this norm percentile");
    normalize_opt = app->add_flag("--normalize", normalize, "scale kept points to unit norm");
    app->add_option("--rows", rows, "sketch rows R");
    app->add_option("--cols", cols, "sketch columns C");
    seed_opt = app->add_option("--seed", seed, "sketch hash seed");
    app->add_option("-k,--top-k", k, "number of heavy hitters K");
    app->add_option("--candidate-multiplier", multiplier, "per-worker candidate budget = multiplier * K");
    app->add_option("--scheme", scheme, "single | log_rank | log_freq");
    jitter_opt = app->add_option("--jitter-seed", jitter_seed, "summary jitter seed");
    app->add_option("-P,--partitions", partitions, "number of shards");
    app->add_option("-j,--jobs", jobs, "concurrent workers");
    app->add_option("-o,--out-dir", out_dir, "output directory");
  }

  sns::PipelineConfig resolve() const {
    sns::PipelineConfig c;
    if (!config_file.empty()) c = sns::load_pipeline_config(config_file);
    if (!input.empty()) c.input = input;
    if (!format.empty()) c.format = format;
    if (dims != 0) c.dims = dims;
    if (bins != 0) c.bins = bins;
    if (!lo.empty() || !hi.empty()) c.bounds = sns::BoundingBox{lo, hi};
    if (threshold_opt->count() > 0) {
      c.threshold = threshold;
      c.threshold_percentile.reset();
    }
    if (percentile_opt->count() > 0) {
      c.threshold_percentile = threshold_percentile;
      c.threshold.reset();
    }
    if (normalize_opt->count() > 0) c.normalize = normalize;
    if (rows != 0) c.sketch.rows = rows;
    if (cols != 0) c.sketch.cols = cols;
    if (seed_opt->count() > 0) c.sketch.seed = seed;
    if (k != 0) c.top_k = k;
    if (multiplier != 0) c.candidate_multiplier = multiplier;
    if (!scheme.empty()) c.scheme = sns::parse_weighting_scheme(scheme);
    if (jitter_opt->count() > 0) c.jitter_seed = jitter_seed;
    if (partitions != 0) c.partitions = partitions;
    if (jobs != 0) c.jobs = jobs;
    if (!out_dir.empty()) c.output_dir = out_dir;
    c.validate();
    return c;
  }
};

std::uint64_t parse_count(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw sns::UsageError("not a number: '" + s + "'");
  }
  if (used != s.size() || !(v >= 1) || v != std::floor(v) || v > 1e18) {
    throw sns::UsageError("expected a positive integer count, got '" + s + "'");
  }
  return static_cast<std::uint64_t>(v);
}

std::vector<sns::RankBand> parse_bands(const std::string& spec) {
  std::vector<sns::RankBand> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw sns::UsageError("band '" + item + "' is not FIRST-LAST");
    out.push_back(sns::RankBand{parse_count(item.substr(0, dash)), parse_count(item.substr(dash + 1))});
  }
  return out;
}

// A grid file is either a bare grid block or a document with a "grid" key
// (manifest).
sns::GridSpec load_grid(const fs::path& p) {
  const auto j = sns::read_json_file(p);
  try {
    return sns::grid_from_json(j.contains("grid") ? j.at("grid") : j);
  } catch (const sns::json::exception& e) {
    throw sns::UsageError(p.string() + ": " + e.what());
  }
}

int cmd_sketch(const std::string& manifest_path, std::size_t shard_id, const ConfigFlags& flags,
               std::uint64_t row_begin, std::uint64_t row_end, const std::string& out_dir) {
  std::optional<sns::ShardManifest> manifest;
  sns::Shard shard;
  if (!manifest_path.empty()) {
    manifest = sns::manifest_from_json(sns::read_json_file(manifest_path));
    if (shard_id >= manifest->shards.size()) throw sns::UsageError("shard id out of range");
    shard = manifest->shards[shard_id];
  } else {
    auto cfg = flags.resolve();
    cfg.partitions = 1;
    auto resolved = sns::resolve_input(cfg);
    const std::uint64_t end = std::min(row_end, resolved.info.rows);
    const std::uint64_t begin = std::min(row_begin, end);
    manifest.emplace(sns::partition(cfg.input, resolved.format, resolved.info.rows, 1, resolved.grid, cfg.sketch,
                                    resolved.preprocess, cfg.candidate_budget()));
    shard = sns::Shard{shard_id, cfg.input, sns::RowRange{begin, end}};
    sns::write_json_file(fs::path(out_dir) / "grid.json", sns::to_json(resolved.grid));
  }
  const auto out = sns::worker_run(shard, *manifest, out_dir);
  std::cout << "shard " << shard.id << ": rows " << out.stats.rows_read << ", kept " << out.stats.points_kept
            << ", clamped " << out.stats.clamped << '\n'
            << out.sketch_file.string() << '\n'
            << out.candidate_file.string() << '\n';
  return 0;
}

int cmd_merge(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<fs::path> files(inputs.begin(), inputs.end());
  const sns::MergePlan plan(files.size());
  const auto merged = sns::tree_merge(files, plan);
  sns::write_sketch_file(out, merged);
  std::cout << "merged " << files.size() << " sketches (" << plan.merges() << " merges, depth " << plan.depth()
            << "), total_updates " << merged.total_updates() << '\n';
  return 0;
}

int cmd_topk(const std::string& sketch_path, const std::vector<std::string>& candidate_files, std::size_t k,
             const std::string& out_csv, const std::string& out_bin) {
  const auto sketch = sns::read_sketch_file(sketch_path);
  std::vector<fs::path> files(candidate_files.begin(), candidate_files.end());
  const auto candidates = sns::union_candidates(files);
  const auto top = sns::finalize(candidates, sketch, k);
  sns::write_heavy_hitters_csv(out_csv, top);
  if (!out_bin.empty()) sns::write_heavy_hitters_binary(out_bin, top);
  std::cout << candidates.size() << " candidates, wrote top " << top.size() << " to " << out_csv << '\n';
  return 0;
}

int cmd_expand(const std::string& topk, const std::string& grid_path, const std::string& scheme,
               std::uint64_t jitter_seed, const std::string& out) {
  const auto grid = load_grid(grid_path);
  const auto list = sns::read_heavy_hitters_csv(topk);
  sns::validate_ranked(list);
  const auto points = sns::expand(list, grid, sns::parse_weighting_scheme(scheme), jitter_seed);
  sns::write_summary_csv(out, grid.dims(), points);
  std::cout << "expanded " << list.size() << " heavy hitters into " << points.size() << " points\n";
  return 0;
}

int cmd_oracle(const std::string& manifest_path, const std::string& sketch_path, const std::string& bands_spec,
               const std::string& counts_out, const std::string& report_out) {
  const auto m = sns::manifest_from_json(sns::read_json_file(manifest_path));
  sns::ExactCounts exact;
  sns::Quantizer quantizer(m.grid);
  sns::for_each_point(m.input, m.format, m.grid.dims(), 0, m.total_rows,
                      [&](std::uint64_t, std::span<const double> p) {
                        if (auto kept = sns::apply_preprocess(p, m.preprocess)) {
                          exact.add(sns::encode(quantizer(*kept), m.grid));
                        }
                      });
  std::cout << "stream length " << exact.stream_length() << ", distinct cells " << exact.distinct() << ", l2 "
            << sns::format_double(exact.l2()) << '\n';
  if (!counts_out.empty()) sns::write_heavy_hitters_csv(counts_out, exact.ranked());
  if (sketch_path.empty()) return 0;

  const auto sketch = sns::read_sketch_file(sketch_path);
  std::vector<sns::RankBand> bands;
  if (bands_spec.empty()) {
    if (exact.distinct() == 0) throw sns::DataError("no points survived preprocessing");
    bands.push_back(sns::RankBand{1, std::min<std::uint64_t>(300, exact.distinct())});
  } else {
    bands = parse_bands(bands_spec);
  }
  const auto report = sns::error_bands(exact, sketch, bands);
  std::cout << "rank band            keys   rms rel. error\n";
  for (const auto& b : report.bands) {
    std::ostringstream band;
    band << b.band.first << '-' << b.band.last;
    std::cout << band.str() << std::string(band.str().size() < 20 ? 21 - band.str().size() : 1, ' ') << b.keys
              << "   " << sns::format_double(b.rms_relative_error) << '\n';
  }
  if (!report_out.empty()) {
    sns::AtomicFile f(report_out);
    sns::write_error_bands_csv(f.stream(), report);
    f.commit();
  }
  return 0;
}

int cmd_bench(const std::string& sizes_spec, const sns::BenchSettings& settings, const std::string& out) {
  std::vector<sns::BenchPoint> points;
  std::stringstream ss(sizes_spec);
  std::string item;
  std::ostringstream csv;
  csv << "updates,seconds,updates_per_second\n";
  while (std::getline(ss, item, ',')) {
    const auto p = sns::bench_ingest(parse_count(item), settings);
    points.push_back(p);
    const std::string row = std::to_string(p.updates) + "," + sns::format_double(p.seconds) + "," +
                            sns::format_double(static_cast<double>(p.updates) / p.seconds);
    csv << row << '\n';
    std::cerr << row << '\n';
  }
  std::cout << csv.str();
  if (points.size() >= 2) {
    const auto fit = sns::fit_linear(points);
    std::cout << "# linear fit: seconds = " << sns::format_double(fit.slope) << " * updates + "
              << sns::format_double(fit.intercept) << ", r2 = " << sns::format_double(fit.r_squared) << '\n';
  }
  if (!out.empty()) {
    sns::AtomicFile f(out);
    f.stream() << csv.str();
    f.commit();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Count Sketch heavy-hitter summaries of large point clouds"};
  app.require_subcommand(1);

  // sketch
  auto* sketch = app.add_subcommand("sketch", "sketch one input shard into SNSK + SNHH files");
  ConfigFlags sketch_flags;
  sketch_flags.attach(sketch);
  std::string sketch_manifest;
  std::size_t sketch_shard = 0;
  std::uint64_t row_begin = 0, row_end = UINT64_MAX;
  sketch->add_option("--manifest", sketch_manifest, "shard manifest written by `pipeline --plan-only`");
  sketch->add_option("--shard", sketch_shard, "shard id (default 0)");
  sketch->add_option("--row-begin", row_begin, "first row (without --manifest)");
  sketch->add_option("--row-end", row_end, "one past the last row (without --manifest)");

  // merge
  auto* merge = app.add_subcommand("merge", "tree-merge SNSK sketch files");
  std::vector<std::string> merge_inputs;
  std::string merge_out;
  merge->add_option("sketches", merge_inputs, "sketch files")->required();
  merge->add_option("-o,--out", merge_out, "merged sketch file")->required();

  // topk
  auto* topk = app.add_subcommand("topk", "rank candidates against a sketch");
  std::string topk_sketch, topk_out, topk_bin;
  std::vector<std::string> topk_candidates;
  std::size_t topk_k = 20000;
  topk->add_option("--sketch", topk_sketch, "SNSK sketch (usually merged)")->required();
  topk->add_option("--candidates", topk_candidates, "SNHH candidate files")->required();
  topk->add_option("-k,--top-k", topk_k, "number of heavy hitters");
  topk->add_option("-o,--out", topk_out, "ranked heavy-hitter CSV")->required();
  topk->add_option("--binary", topk_bin, "also write SNHH binary");

  // expand
  auto* expand = app.add_subcommand("expand", "expand heavy hitters into a summary point cloud");
  std::string expand_topk, expand_grid, expand_out, expand_scheme = "log_rank";
  std::uint64_t expand_jitter = 7;
  expand->add_option("--topk", expand_topk, "ranked heavy-hitter CSV")->required();
  expand->add_option("--grid", expand_grid, "grid.json or manifest.json")->required();
  expand->add_option("--scheme", expand_scheme, "single | log_rank | log_freq");
  expand->add_option("--jitter-seed", expand_jitter, "jitter seed");
  expand->add_option("-o,--out", expand_out, "summary CSV")->required();

  // oracle
  auto* oracle = app.add_subcommand("oracle", "exact counts and rank-banded sketch error");
  std::string oracle_manifest, oracle_sketch, oracle_bands, oracle_counts, oracle_report;
  oracle->add_option("--manifest", oracle_manifest, "manifest.json describing input, grid and preprocessing")
      ->required();
  oracle->add_option("--sketch", oracle_sketch, "sketch to evaluate");
  oracle->add_option("--bands", oracle_bands, "rank bands, e.g. 1-300,301-1000");
  oracle->add_option("--counts-out", oracle_counts, "write exact counts as rank,key,freq CSV");
  oracle->add_option("--report-out", oracle_report, "write the band report CSV");

  // collisions
  auto* collisions = app.add_subcommand("collisions", "expected contact-neighborhood collisions among K heavy hitters");
  double col_k = 0;
  std::uint32_t col_d = 0, col_m = 0;
  bool col_csv = false;
  collisions->add_option("-K", col_k, "heavy hitter count")->required();
  collisions->add_option("-D", col_d, "dimensions")->required();
  collisions->add_option("-M", col_m, "bins per axis")->required();
  collisions->add_flag("--csv", col_csv, "CSV output");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "end-to-end: grid, sketch, merge, top-k, expand");
  ConfigFlags pipe_flags;
  pipe_flags.attach(pipeline);
  bool print_config = false, plan_only = false;
  pipeline->add_flag("--print-config", print_config, "print the resolved config and exit");
  pipeline->add_flag("--plan-only", plan_only, "write manifest.json and grid.json, then stop");

  // bench
  auto* bench = app.add_subcommand("bench", "time ingestion over synthetic Zipf streams");
  std::string bench_sizes = "1e6,1e7,1e8", bench_out;
  sns::BenchSettings bs;
  std::string bench_keys = "1e5";
  bench->add_option("--sizes", bench_sizes, "comma-separated stream sizes");
  bench->add_option("--keys", bench_keys, "distinct keys n");
  bench->add_option("--exponent", bs.exponent, "zipf exponent s");
  bench->add_option("--seed", bs.seed, "stream seed");
  bench->add_option("--rows", bs.sketch.rows, "sketch rows");
  bench->add_option("--cols", bs.sketch.cols, "sketch columns");
  bench->add_option("--capacity", bs.capacity, "tracker capacity");
  bench->add_option("-o,--out", bench_out, "write the timing CSV here too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sketch) {
      const std::string out_dir = sketch_flags.out_dir.empty() ? "." : sketch_flags.out_dir;
      return cmd_sketch(sketch_manifest, sketch_shard, sketch_flags, row_begin, row_end, out_dir);
    }
    if (*merge) return cmd_merge(merge_inputs, merge_out);
    if (*topk) return cmd_topk(topk_sketch, topk_candidates, topk_k, topk_out, topk_bin);
    if (*expand) return cmd_expand(expand_topk, expand_grid, expand_scheme, expand_jitter, expand_out);
    if (*oracle) return cmd_oracle(oracle_manifest, oracle_sketch, oracle_bands, oracle_counts, oracle_report);
    if (*collisions) {
      sns::write_collision_report(std::cout, sns::collision_rate(col_k, col_d, col_m), col_csv);
      return 0;
    }
    if (*pipeline) {
      const auto cfg = pipe_flags.resolve();
      if (print_config) {
        std::cout << sns::to_json(cfg).dump(2) << '\n';
        return 0;
      }
      if (plan_only) {
        const auto manifest = sns::plan_run(cfg);
        const auto files = sns::pipeline_outputs(cfg.output_dir);
        sns::write_json_file(files.manifest, sns::to_json(manifest));
        sns::write_json_file(files.grid, sns::to_json(manifest.grid));
        std::cout << files.manifest.string() << '\n';
        return 0;
      }
      sns::write_json_file(cfg.output_dir / "config.json", sns::to_json(cfg));
      sns::run_pipeline(cfg, &std::cout);
      return 0;
    }
    if (*bench) {
      bs.keys = parse_count(bench_keys);
      return cmd_bench(bench_sizes, bs, bench_out);
    }
  } catch (const sns::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
