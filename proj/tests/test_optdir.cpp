#include <gtest/gtest.h>

#include <cmath>

#include "l3rs/optdir.hpp"
#include "l3rs/nn.hpp"

using namespace l3rs;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor random_vec(std::size_t n, std::uint64_t seed) {
  Tensor t({n});
  Rng rng(seed);
  fill_normal(rng, t.values(), 1.0);
  return t;
}

ParamSet single(Tensor t) {
  ParamSet p;
  p.components.push_back({make_component_id(0, ComponentKind::Kernel), std::move(t)});
  return p;
}

}  // namespace

TEST(Kinds, NamesRoundTrip) {
  for (auto k : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Adamax, OptimizerKind::Lion,
                 OptimizerKind::Lamb, OptimizerKind::WeightDecay}) {
    EXPECT_EQ(parse_optimizer_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_optimizer_kind("adam"), OptimizerKind::Adam);
  EXPECT_THROW(parse_optimizer_kind("rmsprop"), ConfigError);
}

TEST(Sgd, Negates) {
  EXPECT_EQ(dir_sgd(vec({1, -2})).data, (std::vector<double>{-1, 2}));
  EXPECT_EQ(dir_sgd(vec({0, 0})).data, (std::vector<double>{0, 0}));
  const auto g = random_vec(17, 3);
  EXPECT_EQ(l2_norm(dir_sgd(g)), l2_norm(g));
}

TEST(Adam, FirstStepHandValue) {
  MomentState s;
  const auto d = dir_adam(s, vec({0.5}), default_hyper(OptimizerKind::Adam), 1);
  EXPECT_NEAR(d.data[0], -0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(d.data[0], -0.99999998, 1e-10);
}

TEST(Adam, FirstStepUnitMagnitude) {
  MomentState s;
  const auto g = random_vec(50, 8);
  const auto d = dir_adam(s, g, default_hyper(OptimizerKind::Adam), 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_GT(std::abs(d.data[i]), 0.0);
    EXPECT_LT(std::abs(d.data[i]), 1.0);
    EXPECT_NEAR(std::abs(d.data[i]), 1.0, 1e-6);
    EXPECT_EQ(std::signbit(d.data[i]), !std::signbit(g.data[i]));
  }
}

TEST(Adam, ZeroGradientZeroDirection) {
  MomentState s;
  for (int k = 1; k <= 5; ++k) {
    for (double x : dir_adam(s, vec({0, 0, 0}), default_hyper(OptimizerKind::Adam), k).data) EXPECT_EQ(x, 0.0);
  }
}

TEST(Adam, ConstantGradientConstantDirection) {
  MomentState s;
  const auto g = random_vec(10, 4);
  const auto hp = default_hyper(OptimizerKind::Adam);
  const auto first = dir_adam(s, g, hp, 1);
  for (int k = 2; k <= 200; ++k) {
    const auto d = dir_adam(s, g, hp, k);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(d.data[i], first.data[i], 1e-12);
  }
}

TEST(Adamax, FirstStepAndScaleCancellation) {
  const auto hp = default_hyper(OptimizerKind::Adamax);
  MomentState s;
  const auto d = dir_adamax(s, vec({2.0}), hp, 1);
  EXPECT_DOUBLE_EQ(s.v.data[0], 2.0);
  EXPECT_NEAR(d.data[0], -2.0 / (2.0 + 1e-8), 1e-15);
  MomentState a, b;
  const auto g = random_vec(12, 5);
  Tensor g7 = g;
  for (double& x : g7.data) x *= 7.0;
  const auto da = dir_adamax(a, g, hp, 1), db = dir_adamax(b, g7, hp, 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    // Scale cancels up to eps: the direction stays -sign(g) once |g| >> eps.
    const double x = g.data[i];
    EXPECT_NEAR(da.data[i], -x / (std::abs(x) + 1e-8), 1e-15);
    EXPECT_NEAR(db.data[i], -7 * x / (7 * std::abs(x) + 1e-8), 1e-15);
    EXPECT_LE(std::abs(da.data[i] - db.data[i]), 1e-8 / std::abs(x));
  }
  MomentState z;
  for (double x : dir_adamax(z, vec({0, 0}), hp, 1).data) EXPECT_EQ(x, 0.0);
}

TEST(Lion, SignsAndMomentum) {
  const auto hp = default_hyper(OptimizerKind::Lion);
  EXPECT_DOUBLE_EQ(hp.beta2, 0.99);
  MomentState s;
  EXPECT_EQ(dir_lion(s, vec({0.5, -3}), hp).data, (std::vector<double>{-1, 1}));
  EXPECT_NEAR(s.m.data[0], 0.01 * 0.5, 1e-16);
  MomentState z;
  const auto d0 = dir_lion(z, vec({0.0, 1.0, 0.0}), hp);
  EXPECT_EQ(d0.data, (std::vector<double>{0, -1, 0}));
  EXPECT_DOUBLE_EQ(squared_norm(d0.values()), 1.0);
  MomentState r;
  for (int k = 0; k < 20; ++k) {
    for (double x : dir_lion(r, random_vec(9, 100 + k), hp).data) EXPECT_TRUE(x == -1.0 || x == 0.0 || x == 1.0);
  }
}

TEST(Lamb, TrustRatio) {
  const auto hp = default_hyper(OptimizerKind::Lamb);
  MomentState s;
  const auto d = dir_lamb(s, vec({0.5}), hp, 1, vec({3.0}));
  EXPECT_NEAR(d.data[0], -3.0, 1e-12);
  MomentState a, b;
  const auto g = random_vec(6, 9);
  const auto dz = dir_lamb(a, g, hp, 1, Tensor({6}));
  const auto da = dir_adam(b, g, hp, 1);
  EXPECT_EQ(dz.data, da.data);
  MomentState c, e;
  const auto w = random_vec(6, 10);
  const auto dl = dir_lamb(c, g, hp, 1, w), dd = dir_adam(e, g, hp, 1);
  const double nl = l2_norm(dl), nd = l2_norm(dd);
  EXPECT_NEAR(nl, l2_norm(w), 1e-12);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(dl.data[i] / nl, dd.data[i] / nd, 1e-12);
}

TEST(WeightDecay, NegatesWeights) {
  EXPECT_EQ(dir_weight_decay(vec({1, -1})).data, (std::vector<double>{-1, 1}));
  const auto w = random_vec(5, 2);
  EXPECT_EQ(l2_norm(dir_weight_decay(w)), l2_norm(w));
}

TEST(Bank, StateCounts) {
  EXPECT_EQ(state_slots(OptimizerKind::Sgd), 0u);
  EXPECT_EQ(state_slots(OptimizerKind::Adam), 2u);
  EXPECT_EQ(state_slots(OptimizerKind::Lion), 1u);
  EXPECT_EQ(hyper_count(OptimizerKind::Lion), 2u);
  EXPECT_EQ(hyper_count(OptimizerKind::WeightDecay), 0u);
}

TEST(Bank, SgdOnly) {
  DirectionBank bank({OptimizerKind::Sgd});
  const auto g = single(random_vec(4, 1));
  const auto ds = bank.step(g, single(random_vec(4, 2)));
  ASSERT_EQ(ds.dirs[0].size(), 1u);
  EXPECT_EQ(ds.dirs[0][0], dir_sgd(g[0]));
  EXPECT_EQ(bank.step_count(), 1);
}

TEST(Bank, StateIsolation) {
  DirectionBank solo({OptimizerKind::Adam});
  DirectionBank mixed({OptimizerKind::Lion, OptimizerKind::Sgd, OptimizerKind::Adam});
  const auto w = single(random_vec(8, 3));
  for (int k = 0; k < 10; ++k) {
    const auto g = single(random_vec(8, 40 + k));
    const auto a = solo.step(g, w), b = mixed.step(g, w);
    EXPECT_EQ(a.dirs[0][0], b.dirs[0][2]);
    EXPECT_EQ(b.dirs[0][1], dir_sgd(g[0]));
  }
}

TEST(Bank, ZeroDirectionLogFloor) {
  DirectionBank bank({OptimizerKind::Sgd, OptimizerKind::Adam});
  const auto ds = bank.step(single(Tensor({3})), single(Tensor({3})));
  EXPECT_DOUBLE_EQ(ds.log_norms[0][0], std::log(1e-12));
  EXPECT_NEAR(ds.log_norms[0][1], -27.631021115928547, 1e-12);
}

TEST(Bank, RejectsDuplicatesAndNonFinite) {
  EXPECT_THROW(DirectionBank({OptimizerKind::Sgd, OptimizerKind::Sgd}), ConfigError);
  DirectionBank bank({OptimizerKind::Sgd});
  auto g = single(vec({1.0, std::nan("")}));
  EXPECT_THROW(bank.step(g, single(vec({0, 0}))), DivergenceError);
}

TEST(Bank, ShapesMirrorParams) {
  const NetworkSpec spec{3, {4}, 2};
  const auto p = init_params(spec, 1);
  DirectionBank bank({OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Adamax, OptimizerKind::Lion,
                      OptimizerKind::Lamb, OptimizerKind::WeightDecay});
  const auto ds = bank.step(p, p);
  for (std::size_t c = 0; c < p.size(); ++c) {
    for (const auto& d : ds.dirs[c]) EXPECT_EQ(d.shape, p[c].shape);
  }
}
