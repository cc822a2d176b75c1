#include <gtest/gtest.h>

#include <cmath>

#include "l3rs/features.hpp"

using namespace l3rs;

namespace {

std::vector<ComponentStats> same_stats(std::size_t rows, double x) { return std::vector<ComponentStats>(rows, {x, x}); }

}  // namespace

TEST(Ema, GammaZeroTracksLatest) {
  EmaTracker t({0.0}, 2);
  for (double x : {3.0, -1.0, 7.5}) {
    t.update(x, same_stats(2, x));
    EXPECT_EQ(t.loss(0), x);
    EXPECT_EQ(t.weight(1, 0), x);
  }
}

TEST(Ema, TwoStepHandRecursion) {
  EmaTracker t({0.9}, 1);
  t.update(1.0, same_stats(1, 1.0));
  t.update(3.0, same_stats(1, 3.0));
  EXPECT_NEAR(t.raw_loss(0), 0.39, 1e-15);
  EXPECT_NEAR(t.loss(0), 0.39 / 0.19, 1e-14);
  EXPECT_NEAR(t.loss(0), 2.052632, 1e-6);
}

TEST(Ema, ConstantStream) {
  EmaTracker t({0.0, 0.9, 0.99}, 3);
  for (int k = 1; k <= 300; ++k) {
    t.update(2.5, same_stats(3, -1.25));
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(t.raw_loss(i), 2.5 * (1.0 - std::pow(t.gammas()[i], k)), 1e-12);
      EXPECT_NEAR(t.loss(i), 2.5, 1e-12);
      EXPECT_NEAR(t.grad(2, i), -1.25, 1e-12);
    }
  }
}

TEST(Ema, FirstReadIsFirstSample) {
  EmaTracker t({0.0, 0.9, 0.99}, 2);
  t.update(0.731, {{1.1, -2.3}, {0.4, 5.0}});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(t.loss(i), 0.731);
    EXPECT_EQ(t.weight(0, i), 1.1);
    EXPECT_EQ(t.grad(1, i), 5.0);
  }
  // (0.01 * x) / 0.01 is not x in floating point for every x.
  EmaTracker u({0.99}, 1);
  u.update(-7.0, same_stats(1, -7.0));
  EXPECT_EQ(u.loss(0), -7.0);
  const auto r = t.read(1);
  EXPECT_EQ(r, (std::vector<double>{0.4, 5.0, 0.731, 0.4, 5.0, 0.731, 0.4, 5.0, 0.731}));
}

TEST(Ema, ReadBeforeUpdateThrows) {
  EmaTracker t({0.9}, 1);
  EXPECT_THROW(t.read(0), std::logic_error);
}

TEST(Ema, Validation) {
  EXPECT_THROW(EmaTracker({0.1, 0.2, 0.3, 0.4}, 1), ConfigError);
  EXPECT_THROW(EmaTracker({1.0}, 1), ConfigError);
  EXPECT_NO_THROW(EmaTracker({}, 1));
  EmaTracker t({0.9}, 2);
  EXPECT_THROW(t.update(1.0, same_stats(3, 0.0)), ShapeError);
}

TEST(Ema, ScalarCount) {
  EXPECT_EQ(EmaTracker(default_gammas(), 4).scalar_count(), 28u);
  EXPECT_EQ(EmaTracker({}, 4).scalar_count(), 1u);
}

TEST(TimeFeatures, Layout) {
  const auto cfg = TimeFeatureConfig::defaults();
  ASSERT_EQ(cfg.alphas.size(), 11u);
  ASSERT_EQ(cfg.betas.size(), 4u);
  EXPECT_DOUBLE_EQ(cfg.alphas[5], 0.5);
  EXPECT_DOUBLE_EQ(cfg.betas[0], 1e-4);
  EXPECT_DOUBLE_EQ(cfg.betas[3], 1e-1);
  EXPECT_EQ(time_features(1, 1).size(), kTimeFeatures);
}

TEST(TimeFeatures, HandValues) {
  EXPECT_EQ(time_features(50, 100)[5], 0.0);
  EXPECT_NEAR(time_features(100, 100)[0], std::tanh(10.0), 1e-16);
  EXPECT_NEAR(time_features(100, 100)[0], 0.999999996, 1e-9);
  EXPECT_NEAR(time_features(1, 1000)[11 + 1], 0.0, 1e-15);
  EXPECT_NEAR(time_features(1, 100)[11 + 0], -0.99980, 1e-5);
}

TEST(TimeFeatures, BoundsAndMonotonicity) {
  for (std::int64_t K : {1, 2, 3, 7, 10, 25, 100, 999, 5000}) {
    std::vector<double> prev;
    for (std::int64_t k = 1; k <= K; ++k) {
      const auto f = time_features(k, K);
      for (double x : f) {
        EXPECT_GT(x, -1.0);
        EXPECT_LT(x, 1.0);
      }
      if (!prev.empty()) {
        for (std::size_t i = 0; i < 11; ++i) EXPECT_GE(f[i], prev[i]);
      }
      prev = f;
    }
  }
  std::vector<double> prev;
  for (std::int64_t K = 1; K <= 200000; K = K * 3 / 2 + 1) {
    const auto f = time_features(1, K);
    if (!prev.empty()) {
      for (std::size_t j = 11; j < 15; ++j) EXPECT_GE(f[j], prev[j]);
    }
    prev = f;
  }
}

TEST(TimeFeatures, RejectsBadSteps) {
  EXPECT_THROW(time_features(1, 0), std::invalid_argument);
  EXPECT_THROW(time_features(0, 5), std::invalid_argument);
  EXPECT_THROW(time_features(6, 5), std::invalid_argument);
}
