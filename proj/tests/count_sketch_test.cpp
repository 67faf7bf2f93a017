#include "sns/count_sketch.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>
#include <random>
#include <thread>
#include <unordered_map>

#include "sns/hash.hpp"
#include "test_util.hpp"

using namespace sns;
using sns::testing::random_keys;
using sns::testing::sketch_of;
using sns::testing::zipf_stream;

namespace {

// Fixed 20-key fixture: key i (1..20) appears 5*i times; 1050 updates.
std::vector<CellKey> twenty_key_stream() {
  std::vector<CellKey> out;
  for (std::uint64_t i = 1; i <= 20; ++i) {
    for (std::uint64_t j = 0; j < 5 * i; ++j) out.push_back(CellKey{i});
  }
  std::mt19937_64 rng(2024);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

TEST(HashTest, Mix64GoldenValues) {
  // Frozen from an independent Python implementation of the finalizer.
  EXPECT_EQ(mix64(0), 0ULL);
  EXPECT_EQ(mix64(1), 0xb456bcfc34c2cb2cULL);
  EXPECT_EQ(mix64(0x0123456789abcdefULL), 0x87cbfbfe89022ceaULL);
}

TEST(HashTest, RowHashGoldenValues) {
  struct Vec {
    std::uint64_t seed;
    std::uint32_t row;
    CellKey key;
    std::uint64_t cols;
    std::uint64_t raw;
    std::uint64_t bucket;
    int sign;
  };
  const Vec vecs[] = {
      {42, 0, CellKey{0}, 200000, 0x96db60317d15c7daULL, 67482, -1},
      {42, 1, CellKey{73}, 200000, 0xa5846a3c98a3ed78ULL, 178040, -1},
      {42, 15, CellKey::from_parts(123, 456), 200000, 0x787556159332291fULL, 139103, +1},
      {0, 0, CellKey{1}, 1024, 0xb456bcfc34c2cb2cULL, 812, +1},
      {0xdeadbeef, 3, CellKey{~static_cast<u128>(0)}, 1000, 0x0baa9903c595090bULL, 163, -1},
  };
  for (const auto& v : vecs) {
    const HashPair h(v.seed, v.row);
    EXPECT_EQ(h.raw(v.key), v.raw);
    EXPECT_EQ(h.bucket(v.key, v.cols), v.bucket);
    EXPECT_EQ(h.sign(v.key), v.sign);
  }
}

TEST(HashTest, SignBalance) {
  const auto keys = random_keys(1000000, 11);
  for (std::uint32_t r = 0; r < 16; ++r) {
    const HashPair h(42, r);
    std::size_t plus = 0;
    for (CellKey k : keys) plus += h.sign(k) > 0;
    EXPECT_NEAR(static_cast<double>(plus) / keys.size(), 0.5, 0.01) << "row " << r;
  }
}

TEST(HashTest, BucketUniformityChiSquare) {
  constexpr std::uint64_t kCols = 1024;
  const auto keys = random_keys(1000000, 12);
  const boost::math::chi_squared dist(kCols - 1);
  const double lo = boost::math::quantile(dist, 0.0005);
  const double hi = boost::math::quantile(dist, 0.9995);
  for (std::uint32_t r = 0; r < 4; ++r) {
    const HashPair h(7, r);
    std::vector<double> occ(kCols, 0);
    for (CellKey k : keys) occ[h.bucket(k, kCols)] += 1;
    const double expected = static_cast<double>(keys.size()) / kCols;
    double chi2 = 0;
    for (double o : occ) chi2 += (o - expected) * (o - expected) / expected;
    EXPECT_GE(chi2, lo) << "row " << r;
    EXPECT_LE(chi2, hi) << "row " << r;
  }
}

TEST(CountSketchTest, InitIsZero) {
  const CountSketch s(SketchConfig{16, 200000, 42});
  EXPECT_EQ(s.counters().size(), 3200000u);
  EXPECT_EQ(s.counter_bytes(), 25600000u);
  EXPECT_EQ(s.total_updates(), 0u);
  EXPECT_TRUE(std::all_of(s.counters().begin(), s.counters().end(), [](auto c) { return c == 0; }));

  const CountSketch tiny(SketchConfig{1, 1, 0});
  EXPECT_EQ(tiny.counters().size(), 1u);
  EXPECT_EQ(tiny.estimate(CellKey{99}), 0);
}

TEST(CountSketchTest, InitRejectsEmptyShape) {
  EXPECT_THROW(CountSketch(SketchConfig{0, 10, 1}), UsageError);
  EXPECT_THROW(CountSketch(SketchConfig{3, 0, 1}), UsageError);
}

TEST(CountSketchTest, SingleKeyIsExact) {
  for (std::uint32_t rows : {1u, 4u, 5u, 16u}) {
    CountSketch s(SketchConfig{rows, 37, 5});
    const CellKey key = CellKey::from_parts(3, 9);
    for (int i = 0; i < 100; ++i) s.update(key);
    EXPECT_EQ(s.estimate(key), 100);
    EXPECT_EQ(s.total_updates(), 100u);
    EXPECT_DOUBLE_EQ(s.estimate_l2(), 100.0);
  }
}

TEST(CountSketchTest, UpdateThenInverseRestores) {
  CountSketch s = sketch_of(SketchConfig{5, 64, 3}, random_keys(500, 1));
  const auto before = std::vector<std::int64_t>(s.counters().begin(), s.counters().end());
  s.update(CellKey{77}, +1);
  s.update(CellKey{77}, -1);
  EXPECT_EQ(std::vector<std::int64_t>(s.counters().begin(), s.counters().end()), before);
}

TEST(CountSketchTest, RowSumsTrackSignedUpdates) {
  const auto keys = random_keys(2000, 2);
  CountSketch s(SketchConfig{6, 50, 8});
  std::vector<std::int64_t> expected(6, 0);
  for (CellKey k : keys) {
    s.update(k);
    for (std::uint32_t r = 0; r < 6; ++r) expected[r] += s.hash(r).sign(k);
  }
  for (std::uint32_t r = 0; r < 6; ++r) {
    std::int64_t sum = 0, abs_sum = 0;
    for (auto c : s.row(r)) {
      sum += c;
      abs_sum += std::llabs(c);
    }
    EXPECT_EQ(sum, expected[r]);
    EXPECT_LE(static_cast<std::uint64_t>(abs_sum), s.total_updates());
  }
}

TEST(CountSketchTest, WeightedUpdateEqualsRepeatedUnit) {
  CountSketch a(SketchConfig{5, 100, 1});
  CountSketch b(SketchConfig{5, 100, 1});
  a.update(CellKey{5}, 7);
  for (int i = 0; i < 7; ++i) b.update(CellKey{5});
  EXPECT_TRUE(std::equal(a.counters().begin(), a.counters().end(), b.counters().begin()));
  EXPECT_EQ(a.estimate(CellKey{5}), 7);
}

TEST(CountSketchTest, OverflowIsAllOrNothing) {
  CountSketch s(SketchConfig{8, 4, 1});
  s.update(CellKey{1}, INT64_MAX);
  const auto before = std::vector<std::int64_t>(s.counters().begin(), s.counters().end());
  const auto updates = s.total_updates();
  EXPECT_THROW(s.update(CellKey{1}, 1), CounterOverflowError);
  EXPECT_EQ(std::vector<std::int64_t>(s.counters().begin(), s.counters().end()), before);
  EXPECT_EQ(s.total_updates(), updates);
  EXPECT_THROW(s.update(CellKey{1}, INT64_MIN), CounterOverflowError);
}

TEST(CountSketchTest, UpdateAndEstimateMatchesSeparateCalls) {
  CountSketch a(SketchConfig{6, 40, 9});
  CountSketch b(SketchConfig{6, 40, 9});
  for (CellKey k : zipf_stream(300, 5000, 1.0, 4)) {
    const auto fused = a.update_and_estimate(k);
    b.update(k);
    ASSERT_EQ(fused, b.estimate(k));
  }
}

TEST(CountSketchTest, EvenRowMedianTruncatesTowardZero) {
  std::vector<std::int64_t> v{-3, 0};
  EXPECT_EQ(detail::median_truncated(v), -1);
  v = {2, 1};
  EXPECT_EQ(detail::median_truncated(v), 1);
  v = {100, 3, 5, 4};
  EXPECT_EQ(detail::median_truncated(v), 4);
  v = {INT64_MAX, INT64_MAX};
  EXPECT_EQ(detail::median_truncated(v), INT64_MAX);
  v = {9, -2, 4};
  EXPECT_EQ(detail::median_truncated(v), 4);
}

TEST(CountSketchTest, SmallStreamWithinL2Bound) {
  // 20 keys, 1000 updates, 5x50 sketch, 100 seeds.
  const auto stream = zipf_stream(20, 1000, 1.0, 99);
  std::map<CellKey, std::int64_t> exact;
  for (CellKey k : stream) ++exact[k];
  double l2 = 0;
  for (const auto& [k, f] : exact) l2 += static_cast<double>(f) * f;
  l2 = std::sqrt(l2);
  const double bound = 3 * l2 / std::sqrt(50.0);
  std::size_t ok = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = sketch_of(SketchConfig{5, 50, seed}, stream);
    for (const auto& [k, f] : exact) {
      ok += std::abs(static_cast<double>(s.estimate(k) - f)) <= bound;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(ok) / total, 0.95);
}

TEST(CountSketchTest, ErrorBoundWithTailNorm) {
  // |est - f_i| <= 3 * ||f without i||_2 / sqrt(C) for >= 95% of (key, seed).
  const auto stream = twenty_key_stream();
  constexpr std::uint32_t kCols = 16;
  std::size_t ok = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = sketch_of(SketchConfig{5, kCols, seed}, stream);
    for (std::uint64_t i = 1; i <= 20; ++i) {
      double tail = 0;
      for (std::uint64_t j = 1; j <= 20; ++j) {
        if (j != i) tail += 25.0 * j * j;
      }
      const double bound = 3 * std::sqrt(tail) / std::sqrt(static_cast<double>(kCols));
      ok += std::abs(static_cast<double>(s.estimate(CellKey{i})) - 5.0 * i) <= bound;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(ok) / total, 0.95);
}

TEST(CountSketchTest, EstimateIsUnbiasedOverSeeds) {
  const auto stream = twenty_key_stream();
  constexpr int kSeeds = 500;
  std::vector<std::vector<double>> est(21);
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto s = sketch_of(SketchConfig{3, 16, seed * 7919 + 1}, stream);
    for (std::uint64_t i = 0; i <= 20; ++i) est[i].push_back(static_cast<double>(s.estimate(CellKey{i})));
  }
  // key 0 never appears
  for (std::uint64_t i = 0; i <= 20; ++i) {
    double mean = 0;
    for (double e : est[i]) mean += e;
    mean /= kSeeds;
    double var = 0;
    for (double e : est[i]) var += (e - mean) * (e - mean);
    const double se = std::sqrt(var / (kSeeds - 1) / kSeeds);
    EXPECT_LE(std::abs(mean - 5.0 * i), 3 * se + 1e-12) << "key " << i;
  }
}

TEST(CountSketchTest, AmsSecondMomentIsUnbiased) {
  // f = [30, 20, 10]: ||f||^2 = 900 + 400 + 100 = 1400.
  std::vector<CellKey> stream;
  for (int i = 0; i < 30; ++i) stream.push_back(CellKey{101});
  for (int i = 0; i < 20; ++i) stream.push_back(CellKey{202});
  for (int i = 0; i < 10; ++i) stream.push_back(CellKey{303});
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const double l2 = sketch_of(SketchConfig{1, 4, 1000 + seed}, stream).estimate_l2();
    mean += l2 * l2;
  }
  mean /= 200;
  EXPECT_NEAR(mean, 1400.0, 140.0);
}

TEST(CountSketchTest, EmptySketchL2IsZero) {
  EXPECT_EQ(CountSketch(SketchConfig{4, 10, 0}).estimate_l2(), 0.0);
}

TEST(CountSketchTest, ZipfTopHundredWithinOnePercent) {
  const auto stream = zipf_stream(100000, 1000000, 1.1, 17);
  std::unordered_map<CellKey, std::int64_t> exact;
  for (CellKey k : stream) ++exact[k];
  std::vector<std::pair<std::int64_t, CellKey>> ranked;
  for (const auto& [k, f] : exact) ranked.emplace_back(f, k);
  std::sort(ranked.rbegin(), ranked.rend());
  const auto s = sketch_of(SketchConfig{16, 200000, 42}, stream);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto [f, k] = ranked[i];
    EXPECT_LE(std::abs(static_cast<double>(s.estimate(k) - f)) / f, 0.01) << "rank " << i + 1;
  }
}

TEST(MergeTest, ZeroIsIdentity) {
  const auto s = sketch_of(SketchConfig{5, 64, 3}, random_keys(1000, 5));
  const auto m = merge(s, CountSketch(s.config()));
  EXPECT_EQ(m, s);
}

TEST(MergeTest, SplitStreamsMergeBitwise) {
  std::mt19937_64 rng(77);
  const SketchConfig cfg{7, 257, 21};
  for (int trial = 0; trial < 100; ++trial) {
    const auto stream = zipf_stream(500, 2000, 1.0, trial);
    const std::size_t cut = rng() % (stream.size() + 1);
    const std::vector<CellKey> a(stream.begin(), stream.begin() + cut), b(stream.begin() + cut, stream.end());
    ASSERT_EQ(merge(sketch_of(cfg, a), sketch_of(cfg, b)), sketch_of(cfg, stream)) << "trial " << trial;
  }
}

TEST(MergeTest, CommutativeAndAssociative) {
  const SketchConfig cfg{5, 33, 4};
  const auto a = sketch_of(cfg, random_keys(300, 1));
  const auto b = sketch_of(cfg, random_keys(300, 2));
  const auto c = sketch_of(cfg, random_keys(300, 3));
  EXPECT_EQ(merge(a, b), merge(b, a));
  EXPECT_EQ(merge(merge(a, b), c), merge(a, merge(b, c)));
}

TEST(MergeTest, RejectsDifferentConfigs) {
  const CountSketch a(SketchConfig{5, 33, 4});
  EXPECT_THROW(merge(a, CountSketch(SketchConfig{5, 33, 5})), IncompatibleSketchError);
  EXPECT_THROW(merge(a, CountSketch(SketchConfig{4, 33, 4})), IncompatibleSketchError);
  EXPECT_THROW(merge(a, CountSketch(SketchConfig{5, 34, 4})), IncompatibleSketchError);
}

TEST(MergeTest, OverflowIsReported) {
  CountSketch a(SketchConfig{3, 2, 1});
  a.update(CellKey{1}, INT64_MAX);
  EXPECT_THROW(merge(a, a), CounterOverflowError);
}

TEST(CountSketchTest, ConcurrentReadersAgree) {
  const auto stream = zipf_stream(1000, 20000, 1.1, 3);
  const auto s = sketch_of(SketchConfig{9, 300, 1}, stream);
  std::vector<std::int64_t> reference;
  for (std::uint64_t i = 1; i <= 1000; ++i) reference.push_back(s.estimate(ZipfGenerator::key_for_rank(i)));
  std::vector<std::thread> readers;
  std::vector<int> mismatches(4, 0);
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&, t] {
      for (std::uint64_t i = 1; i <= 1000; ++i) {
        mismatches[t] += s.estimate(ZipfGenerator::key_for_rank(i)) != reference[i - 1];
      }
    });
  }
  for (auto& r : readers) r.join();
  for (int m : mismatches) EXPECT_EQ(m, 0);
}
