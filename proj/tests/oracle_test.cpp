#include "sns/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace sns;
using sns::testing::sketch_of;
using sns::testing::zipf_stream;

TEST(ExactCountTest, Basics) {
  const CellKey a{1}, b{2};
  const auto e = exact_count(std::vector<CellKey>{a, b, a});
  EXPECT_EQ(e.count(a), 2u);
  EXPECT_EQ(e.count(b), 1u);
  EXPECT_EQ(e.stream_length(), 3u);
  EXPECT_EQ(e.distinct(), 2u);
  const auto empty = exact_count(std::vector<CellKey>{});
  EXPECT_EQ(empty.stream_length(), 0u);
  EXPECT_EQ(empty.distinct(), 0u);
}

TEST(ExactCountTest, TotalsMatchStream) {
  const auto stream = zipf_stream(1000, 20000, 1.0, 3);
  const auto e = exact_count(stream);
  std::uint64_t sum = 0;
  for (const auto& [k, c] : e.map()) {
    EXPECT_GE(c, 1u);
    sum += c;
  }
  EXPECT_EQ(sum, stream.size());
  EXPECT_EQ(e.ranked(), exact_count(stream).ranked());
}

TEST(ExactCountTest, AgreesWithCollisionFreeSketch) {
  // 20 distinct keys <= C/10 with C = 1000, R = 7.
  const auto stream = zipf_stream(20, 3000, 1.0, 5);
  const auto exact = exact_count(stream);
  std::size_t perfect = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = sketch_of(SketchConfig{7, 1000, seed}, stream);
    bool all = true;
    for (const auto& [k, c] : exact.map()) all &= s.estimate(k) == static_cast<std::int64_t>(c);
    perfect += all;
  }
  EXPECT_GE(perfect, 99u);
}

TEST(ErrorBandsTest, PerfectSketchIsZero) {
  const auto stream = zipf_stream(30, 2000, 1.0, 6);
  const auto exact = exact_count(stream);
  const auto s = sketch_of(SketchConfig{7, 100000, 1}, stream);
  const std::vector<RankBand> bands{{1, 10}, {11, 30}};
  const auto r = error_bands(exact, s, bands);
  ASSERT_EQ(r.bands.size(), 2u);
  for (const auto& b : r.bands) EXPECT_EQ(b.rms_relative_error, 0.0);
  EXPECT_EQ(r.bands[1].keys, 20u);
}

TEST(ErrorBandsTest, MatchesDirectComputation) {
  const auto stream = zipf_stream(500, 20000, 1.0, 7);
  const auto exact = exact_count(stream);
  const auto s = sketch_of(SketchConfig{3, 64, 2}, stream);
  const std::vector<RankBand> bands{{5, 40}};
  const auto r = error_bands(exact, s, bands);
  const auto ranked = exact.ranked();
  double acc = 0;
  for (std::size_t i = 4; i < 40; ++i) {
    const double f = static_cast<double>(ranked[i].freq);
    const double rel = (f - static_cast<double>(s.estimate(ranked[i].key))) / f;
    acc += rel * rel;
  }
  EXPECT_NEAR(r.bands[0].rms_relative_error, std::sqrt(acc / 36), 1e-12);
}

TEST(ErrorBandsTest, Errors) {
  const auto exact = exact_count(zipf_stream(10, 100, 1.0, 1));
  const CountSketch s(SketchConfig{3, 10, 1});
  EXPECT_THROW(error_bands(exact, s, std::vector<RankBand>{{5, 4}}), UsageError);
  EXPECT_THROW(error_bands(exact, s, std::vector<RankBand>{{0, 4}}), UsageError);
  EXPECT_THROW(error_bands(exact, s, std::vector<RankBand>{{1, 1000}}), UsageError);
}

TEST(ErrorBandsTest, ZipfTopThreeHundred) {
  const auto stream = zipf_stream(100000, 1000000, 1.1, 31);
  const auto exact = exact_count(stream);
  const auto s = sketch_of(SketchConfig{16, 200000, 42}, stream);
  const auto r = error_bands(exact, s, std::vector<RankBand>{{1, 300}});
  EXPECT_LE(r.bands[0].rms_relative_error, 0.01);
}

TEST(SubsampleTest, RateOneIsIdentity) {
  const auto stream = zipf_stream(100, 1000, 1.0, 2);
  EXPECT_EQ(subsample(stream, 1.0, 9), stream);
  EXPECT_THROW(subsample(stream, 0.0, 1), UsageError);
  EXPECT_THROW(subsample(stream, 1.5, 1), UsageError);
}

TEST(SubsampleTest, RetainedMassWithinThreeSigma) {
  const auto stream = zipf_stream(1000, 100000, 1.0, 4);
  const double p = 0.03;
  const double mean = p * stream.size();
  const double sigma = std::sqrt(stream.size() * p * (1 - p));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto kept = subsample(stream, p, seed);
    EXPECT_NEAR(static_cast<double>(kept.size()), mean, 3 * sigma) << "seed " << seed;
  }
}

TEST(SubsampleTest, PlantedKeyVanishesWhileSketchKeepsIt) {
  // 500 occurrences of one key inside a 10^6 stream, sampled at 1e-3.
  auto stream = zipf_stream(100000, 1000000 - 500, 1.1, 8);
  const CellKey planted = CellKey::from_parts(0xabcdef, 1);
  for (int i = 0; i < 500; ++i) stream.push_back(planted);
  std::shuffle(stream.begin(), stream.end(), std::mt19937_64(1));

  std::vector<std::size_t> retained;
  double total = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto kept = subsample(stream, 1e-3, trial);
    retained.push_back(static_cast<std::size_t>(std::count(kept.begin(), kept.end(), planted)));
    total += static_cast<double>(retained.back());
  }
  std::nth_element(retained.begin(), retained.begin() + 50, retained.end());
  EXPECT_LE(retained[50], 1u);
  EXPECT_NEAR(total / 100, 0.5, 0.25);

  const auto s = sketch_of(SketchConfig{16, 200000, 42}, stream);
  EXPECT_LE(std::abs(static_cast<double>(s.estimate(planted)) - 500) / 500, 0.05);
}

TEST(CollisionRateTest, ReproducesReportedValues) {
  const auto low = collision_rate(1e4, 10, 8);
  EXPECT_NEAR(low.collisions, 1057.08, 0.01);
  EXPECT_GE(low.collisions, 1056);
  EXPECT_LE(low.collisions, 1058);
  const auto high = collision_rate(1e4, 10, 16);
  EXPECT_NEAR(high.collisions, 0.00144158, 1e-8);
  EXPECT_NEAR(low.rho, 1e4 * std::pow(3.0 / 8, 10), 1e-12);
  EXPECT_NEAR(low.lambda, 1e4 / std::pow(8.0, 10), 1e-18);
}

TEST(CollisionRateTest, ZeroHeavyHitters) {
  const auto e = collision_rate(0, 5, 4);
  EXPECT_EQ(e.collisions, 0.0);
  EXPECT_EQ(e.rho, 0.0);
}

TEST(CollisionRateTest, Monotone) {
  for (std::uint32_t d = 1; d <= 12; ++d) {
    for (double k : {1.0, 10.0, 1e3, 1e4, 1e6}) {
      double prev = INFINITY;
      for (std::uint32_t m = 2; m <= 40; ++m) {
        const double c = collision_rate(k, d, m).collisions;
        ASSERT_LE(c, prev + 1e-12 * std::abs(prev)) << d << " " << k << " " << m;
        ASSERT_GE(c, 0.0);
        ASSERT_LE(c, k);
        prev = c;
      }
    }
    for (std::uint32_t m = 2; m <= 40; m += 3) {
      double prev = 0;
      for (double k = 0; k <= 1e5; k += 977) {
        const double c = collision_rate(k, d, m).collisions;
        ASSERT_GE(c, prev - 1e-12 * prev);
        prev = c;
      }
    }
  }
}

TEST(CollisionRateTest, HugeVolumeStaysFinite) {
  const auto e = collision_rate(1e4, 100, 1000);
  EXPECT_EQ(e.collisions, 0.0);
  EXPECT_NEAR(e.log10_volume, 300, 1e-9);
  EXPECT_THROW(collision_rate(1, 0, 4), UsageError);
  EXPECT_THROW(collision_rate(1, 3, 1), UsageError);
}

TEST(CollisionRateTest, SmallRhoSeriesMatchesClosedForm) {
  for (double rho : {1e-3, 0.1, 0.49, 0.51, 2.0}) {
    const double closed = 1 - std::exp(-rho) * (1 + rho);
    EXPECT_NEAR(poisson_at_least_two(rho), closed, 1e-13 + 1e-9 * closed);
  }
}
