#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "maestro/confidence.hpp"
#include "maestro/errors.hpp"
#include "maestro/rng.hpp"

using namespace maestro;

TEST(ConfBase, MeanOfLogprobs) {
  const std::vector<double> a{-0.1, -0.2, -0.3};
  EXPECT_NEAR(conf_base(a), -0.2, 1e-15);
  const std::vector<double> z{0.0, 0.0, 0.0};
  EXPECT_EQ(conf_base(z), 0.0);
  EXPECT_THROW(conf_base(std::vector<double>{}), ContractError);
}

TEST(Percentile, LinearInterpolationOfOrderStatistics) {
  const std::vector<double> s{-3.0, -2.0, -1.0};
  // h = 2 * 0.05 = 0.1 -> -3 + 0.1; h = 1.9 -> -2 + 0.9
  EXPECT_NEAR(percentile_sorted(s, 5.0), -2.9, 1e-12);
  EXPECT_NEAR(percentile_sorted(s, 95.0), -1.1, 1e-12);
  EXPECT_EQ(percentile_sorted(s, 0.0), -3.0);
  EXPECT_EQ(percentile_sorted(s, 100.0), -1.0);
  EXPECT_EQ(percentile_sorted(std::vector<double>{-0.5}, 50.0), -0.5);
}

namespace {

// 21 sorted points, so h(5) = 1 and h(95) = 19 land exactly on order statistics.
std::vector<double> window_with_p5_p95(double p5, double p95) {
  std::vector<double> w(21);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i <= 1) w[i] = p5;
    else if (i >= 19) w[i] = p95;
    else w[i] = p5 + (p95 - p5) * (static_cast<double>(i) - 1.0) / 18.0;
  }
  return w;
}

}  // namespace

TEST(ConfAdj, ColdStartUsesExpFallback) {
  const ConfidenceParams p;
  EXPECT_EQ(conf_adj_from(0.0, {}, 0, p), 1.0);
  EXPECT_NEAR(conf_adj_from(-1.0, {}, 0, p), std::exp(-1.0), 1e-15);
}

TEST(ConfAdj, WarmPercentileScore) {
  const ConfidenceParams p;
  const auto w = window_with_p5_p95(-2.0, -0.5);
  EXPECT_NEAR(percentile_sorted(w, 5.0), -2.0, 1e-12);
  EXPECT_NEAR(percentile_sorted(w, 95.0), -0.5, 1e-12);
  EXPECT_NEAR(conf_adj_from(-1.25, w, 32, p), 0.5, 1e-12);
  EXPECT_EQ(conf_adj_from(-0.25, w, 32, p), 1.0);
  EXPECT_EQ(conf_adj_from(-3.0, w, 500, p), 0.0);
}

TEST(ConfAdj, WarmupBlendsLinearly) {
  const ConfidenceParams p;
  const auto w = window_with_p5_p95(-2.0, -0.5);
  // n = 16 of 32: half fallback, half percentile score.
  EXPECT_NEAR(conf_adj_from(-1.25, w, 16, p), 0.5 * std::exp(-1.25) + 0.5 * 0.5, 1e-12);
}

TEST(ConfAdj, DegenerateSpreadFallsBack) {
  const ConfidenceParams p;
  const std::vector<double> flat(40, -0.7);
  EXPECT_NEAR(conf_adj_from(-0.7, flat, 40, p), std::exp(-0.7), 1e-15);
}

TEST(ConfAdj, BoundedAndMonotone) {
  Rng rng(3);
  const ConfidenceParams p;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> w(rng.below(50));
    for (double& v : w) v = -rng.uniform(0.0, 2.0);
    const auto n = w.size() + rng.below(40);
    double a = -rng.uniform(0.0, 3.0), b = -rng.uniform(0.0, 3.0);
    if (a > b) std::swap(a, b);
    const double ya = conf_adj_from(a, w, n, p), yb = conf_adj_from(b, w, n, p);
    ASSERT_GE(ya, 0.0);
    ASSERT_LE(yb, 1.0);
    ASSERT_LE(ya, yb + 1e-15);
  }
}

TEST(RunningStatsTest, ObserveAndRing) {
  ConfidenceParams p;
  p.window = 4;
  RunningStats s(p);
  const ModelId m{"m"};
  s.observe(m, -0.5);
  auto snap = s.snapshot(m);
  EXPECT_EQ(snap.count, 1u);
  EXPECT_EQ(snap.window, (std::vector<double>{-0.5}));
  for (int i = 1; i <= 5; ++i) s.observe(m, -static_cast<double>(i));
  snap = s.snapshot(m);
  EXPECT_EQ(snap.count, 6u);
  EXPECT_EQ(snap.window, (std::vector<double>{-2.0, -3.0, -4.0, -5.0}));
  EXPECT_EQ(s.snapshot(ModelId{"other"}).count, 0u);
}

TEST(RunningStatsTest, RestoreRoundTripAndCopy) {
  RunningStats s;
  for (int i = 0; i < 10; ++i) s.observe(ModelId{"a"}, -0.1 * i);
  RunningStats t;
  t.restore(s.all());
  EXPECT_EQ(t.snapshot(ModelId{"a"}).window, s.snapshot(ModelId{"a"}).window);
  EXPECT_EQ(t.snapshot(ModelId{"a"}).count, 10u);
  RunningStats u = s;
  u.observe(ModelId{"a"}, -1.0);
  EXPECT_EQ(s.snapshot(ModelId{"a"}).count, 10u);
  EXPECT_EQ(conf_adj(-0.3, ModelId{"a"}, s), conf_adj(-0.3, ModelId{"a"}, t));
}

TEST(RunningStatsTest, RestoreRejectsCorruptWindows) {
  ConfidenceParams p;
  p.window = 2;
  RunningStats s(p);
  EXPECT_THROW(s.restore({{"a", {{-1.0, -2.0, -3.0}, 3}}}), ConfigError);
  EXPECT_THROW(s.restore({{"a", {{0.5}, 1}}}), ConfigError);
}

TEST(RunningStatsTest, ConcurrentObservesAreSerialized) {
  RunningStats s;
  std::vector<std::thread> ts;
  for (int t = 0; t < 8; ++t)
    ts.emplace_back([&] {
      for (int i = 0; i < 500; ++i) s.observe(ModelId{"m"}, -0.01 * (i % 7));
    });
  for (auto& t : ts) t.join();
  EXPECT_EQ(s.snapshot(ModelId{"m"}).count, 4000u);
  EXPECT_EQ(s.snapshot(ModelId{"m"}).window.size(), 512u);
}
