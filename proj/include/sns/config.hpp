#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sns/count_sketch.hpp"
#include "sns/errors.hpp"
#include "sns/point_io.hpp"
#include "sns/quantizer.hpp"
#include "sns/summary.hpp"

namespace sns {

using json = nlohmann::json;

/// Everything a reproducible run needs. Loaded from one JSON file, then
/// individual flags may override fields.
struct PipelineConfig {
  std::filesystem::path input;
  std::string format = "auto";  // csv | binary | auto (by extension)
  std::size_t dims = 0;         // 0: take from the input
  std::uint32_t bins = 25;
  std::optional<BoundingBox> bounds;  // nullopt: fit to the data
  std::optional<double> threshold;
  std::optional<double> threshold_percentile;  // 0..100 over input norms
  bool normalize = false;
  SketchConfig sketch{16, 200000, 42};
  std::size_t top_k = 20000;
  std::size_t candidate_multiplier = 2;
  WeightingScheme scheme = WeightingScheme::log_rank;
  std::uint64_t jitter_seed = 7;
  std::size_t partitions = 1;
  std::size_t jobs = 1;
  std::filesystem::path output_dir = "sns_out";

  std::size_t candidate_budget() const { return top_k * candidate_multiplier; }

  PointFormat point_format() const {
    return format == "auto" ? guess_point_format(input) : parse_point_format(format);
  }

  void validate() const {
    if (input.empty()) throw UsageError("config: input path is required");
    if (format != "auto") parse_point_format(format);
    if (bins < 2) throw UsageError("config: bins must be >= 2");
    if (bounds) {
      bounds->validate();
      if (dims != 0 && bounds->dims() != dims) throw UsageError("config: bounds dimension differs from dims");
    }
    if (threshold && !(*threshold >= 0)) throw UsageError("config: threshold must be >= 0");
    if (threshold_percentile && !(*threshold_percentile >= 0 && *threshold_percentile <= 100)) {
      throw UsageError("config: threshold_percentile must be within [0, 100]");
    }
    if (threshold && threshold_percentile) throw UsageError("config: give threshold or threshold_percentile, not both");
    sketch.validate();
    if (top_k == 0) throw UsageError("config: k must be >= 1");
    if (candidate_multiplier == 0) throw UsageError("config: candidate_multiplier must be >= 1");
    if (partitions == 0) throw UsageError("config: partitions must be >= 1");
    if (jobs == 0) throw UsageError("config: jobs must be >= 1");
  }
};

inline json to_json(const SketchConfig& c) { return json{{"rows", c.rows}, {"cols", c.cols}, {"seed", c.seed}}; }

inline SketchConfig sketch_config_from_json(const json& j) {
  SketchConfig c;
  c.rows = j.at("rows").get<std::uint32_t>();
  c.cols = j.at("cols").get<std::uint32_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

/// The grid block: {"dims", "bins", "lo", "hi"}.
inline json to_json(const GridSpec& g) {
  return json{{"dims", g.dims()}, {"bins", g.bins()}, {"lo", g.box().lo}, {"hi", g.box().hi}};
}

inline GridSpec grid_from_json(const json& j) {
  BoundingBox box{j.at("lo").get<std::vector<double>>(), j.at("hi").get<std::vector<double>>()};
  if (j.contains("dims") && j.at("dims").get<std::size_t>() != box.dims()) {
    throw UsageError("grid block: dims does not match lo/hi length");
  }
  return GridSpec(std::move(box), j.at("bins").get<std::uint32_t>());
}

inline json to_json(const PreprocessOptions& p) {
  return json{{"threshold", p.threshold ? json(*p.threshold) : json(nullptr)}, {"normalize", p.normalize}};
}

inline PreprocessOptions preprocess_from_json(const json& j) {
  PreprocessOptions p;
  if (j.contains("threshold") && !j.at("threshold").is_null()) p.threshold = j.at("threshold").get<double>();
  p.normalize = j.value("normalize", false);
  return p;
}

inline json to_json(const PipelineConfig& c) {
  json bounds = "fit";
  if (c.bounds) bounds = json{{"lo", c.bounds->lo}, {"hi", c.bounds->hi}};
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"input", {{"path", c.input.string()}, {"format", c.format}}},
      {"grid", {{"dims", c.dims}, {"bins", c.bins}, {"bounds", bounds}}},
      {"preprocess",
       {{"threshold", opt(c.threshold)}, {"threshold_percentile", opt(c.threshold_percentile)},
        {"normalize", c.normalize}}},
      {"sketch", to_json(c.sketch)},
      {"topk", {{"k", c.top_k}, {"candidate_multiplier", c.candidate_multiplier}}},
      {"summary", {{"scheme", to_string(c.scheme)}, {"jitter_seed", c.jitter_seed}}},
      {"distributed", {{"partitions", c.partitions}, {"jobs", c.jobs}}},
      {"output_dir", c.output_dir.string()},
  };
}

/// Missing sections keep their defaults.
inline PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  try {
    if (j.contains("input")) {
      const auto& in = j.at("input");
      c.input = in.value("path", std::string());
      c.format = in.value("format", std::string("auto"));
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      c.dims = g.value("dims", std::size_t{0});
      c.bins = g.value("bins", c.bins);
      if (g.contains("bounds")) {
        const auto& b = g.at("bounds");
        if (b.is_string()) {
          if (b.get<std::string>() != "fit") throw UsageError("config: bounds must be \"fit\" or {lo, hi}");
        } else {
          c.bounds = BoundingBox{b.at("lo").get<std::vector<double>>(), b.at("hi").get<std::vector<double>>()};
        }
      }
    }
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      if (p.contains("threshold") && !p.at("threshold").is_null()) c.threshold = p.at("threshold").get<double>();
      if (p.contains("threshold_percentile") && !p.at("threshold_percentile").is_null()) {
        c.threshold_percentile = p.at("threshold_percentile").get<double>();
      }
      c.normalize = p.value("normalize", false);
    }
    if (j.contains("sketch")) {
      const auto& s = j.at("sketch");
      c.sketch.rows = s.value("rows", c.sketch.rows);
      c.sketch.cols = s.value("cols", c.sketch.cols);
      c.sketch.seed = s.value("seed", c.sketch.seed);
    }
    if (j.contains("topk")) {
      c.top_k = j.at("topk").value("k", c.top_k);
      c.candidate_multiplier = j.at("topk").value("candidate_multiplier", c.candidate_multiplier);
    }
    if (j.contains("summary")) {
      c.scheme = parse_weighting_scheme(j.at("summary").value("scheme", std::string("log_rank")));
      c.jitter_seed = j.at("summary").value("jitter_seed", c.jitter_seed);
    }
    if (j.contains("distributed")) {
      c.partitions = j.at("distributed").value("partitions", c.partitions);
      c.jobs = j.at("distributed").value("jobs", c.jobs);
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  AtomicFile f(path);
  f.stream() << j.dump(2) << '\n';
  f.commit();
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  return pipeline_config_from_json(read_json_file(path));
}

}  // namespace sns
