// Writes a clustered synthetic point cloud: make_points <out.csv|out.snsd> <rows> <dims>

#include <cmath>
#include <iostream>
#include <random>
#include <string>

#include "sns/point_io.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: make_points <output> <rows> <dims>\n";
    return 1;
  }
  const std::filesystem::path out = argv[1];
  const std::size_t rows = std::stoull(argv[2]);
  const std::size_t dims = std::stoull(argv[3]);
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> noise(0, 0.02);
  std::vector<std::vector<double>> pts(rows, std::vector<double>(dims));
  for (auto& p : pts) {
    const auto c = static_cast<double>(rng() % 25);
    for (std::size_t d = 0; d < dims; ++d) p[d] = std::sin(c * (d + 1)) + noise(rng);
  }
  if (!out.parent_path().empty()) std::filesystem::create_directories(out.parent_path());
  if (sns::guess_point_format(out) == sns::PointFormat::binary) {
    sns::write_points_binary(out, dims, pts);
  } else {
    sns::write_points_csv(out, dims, pts);
  }
  return 0;
}
