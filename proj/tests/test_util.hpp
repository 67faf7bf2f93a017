#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sns/cell_key.hpp"
#include "sns/count_sketch.hpp"
#include "sns/zipf.hpp"

namespace sns::testing {

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("sns-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<CellKey> zipf_stream(std::uint64_t keys, std::uint64_t updates, double s, std::uint64_t seed) {
  ZipfGenerator gen(keys, s, seed);
  return gen.take(updates);
}

inline std::vector<CellKey> random_keys(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CellKey> out(n);
  for (auto& k : out) {
    const auto hi = rng();
    k = CellKey::from_parts(hi, rng());
  }
  return out;
}

inline CountSketch sketch_of(const SketchConfig& cfg, const std::vector<CellKey>& keys) {
  CountSketch s(cfg);
  for (CellKey k : keys) s.update(k);
  return s;
}

/// Fraction of `truth` present in `found`.
inline double precision_at(const std::vector<CellKey>& found, const std::vector<CellKey>& truth) {
  std::vector<CellKey> a = found, b = truth;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<CellKey> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return truth.empty() ? 1.0 : static_cast<double>(both.size()) / static_cast<double>(truth.size());
}

}  // namespace sns::testing
