#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "l3rs/l3rs.hpp"
#include "oracles.hpp"

using namespace l3rs;

namespace {

TaskSource pretrained_source(Split split = Split::MetaTrain) {
  TaskSource src;
  src.split = split;
  src.checkpoint = std::make_shared<const ParamSet>(pretrain_checkpoint(src.dist, src.hidden, 50, 1).params);
  return src;
}

}  // namespace

TEST(Distribution, SplitsAreDisjointAndConsecutive) {
  const TaskDistributionSpec d;
  const auto a = d.split_classes(Split::Pretrain), b = d.split_classes(Split::MetaTrain),
             c = d.split_classes(Split::MetaTest);
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(b, (std::vector<std::size_t>{8, 9, 10, 11}));
  EXPECT_EQ(c, (std::vector<std::size_t>{12, 13, 14, 15}));
}

TEST(Distribution, Validation) {
  TaskDistributionSpec d;
  d.pretrain_classes = 10;
  EXPECT_THROW(d.validate(), ConfigError);
  d = {};
  d.k_min = 0;
  EXPECT_THROW(d.validate(), ConfigError);
  d = {};
  d.k_min = 9;
  d.k_max = 8;
  EXPECT_THROW(d.validate(), ConfigError);
  TaskSource src;
  src.dist.classes_per_task = 5;
  EXPECT_THROW(sample_task(src, 1), ConfigError);
}

TEST(Tasks, WholeSplitWhenClassesEqualSplitSize) {
  TaskSource src;
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto t = sample_task(src, s);
    std::sort(t.classes.begin(), t.classes.end());
    EXPECT_EQ(t.classes, src.dist.split_classes(Split::MetaTrain));
  }
}

TEST(Tasks, FixedK) {
  TaskSource src;
  src.dist.k_min = src.dist.k_max = 10;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto t = sample_task(src, s);
    EXPECT_EQ(t.K, 10);
    EXPECT_EQ(t.train_batches.size(), 10u);
  }
}

TEST(Tasks, KWithinRangeAndLabelsRemapped) {
  TaskSource src;
  std::set<std::int64_t> ks;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto t = sample_task(src, s);
    EXPECT_GE(t.K, 5);
    EXPECT_LE(t.K, 25);
    ks.insert(t.K);
    for (auto y : t.eval_batch.y) EXPECT_LT(y, 4u);
    EXPECT_EQ(t.eval_batch.size(), 256u);
    EXPECT_EQ(t.train_batches.front().size(), 32u);
  }
  EXPECT_EQ(ks.size(), 21u);
}

TEST(Tasks, RegenerateFromSeed) {
  const auto src = pretrained_source();
  const auto a = sample_task(src, 77), b = sample_task(src, 77);
  EXPECT_EQ(a.theta0, b.theta0);
  EXPECT_EQ(a.eval_batch.x, b.eval_batch.x);
  EXPECT_EQ(a.train_batches.back().x, b.train_batches.back().x);
  EXPECT_NE(sample_task(src, 78).eval_batch.x, a.eval_batch.x);
}

TEST(Tasks, EvalBatchIndependentOfK) {
  TaskSource src;
  const auto a = sample_task(src, 5, 3), b = sample_task(src, 5, 40);
  EXPECT_EQ(a.eval_batch.x, b.eval_batch.x);
  EXPECT_EQ(a.train_batches[2].x, b.train_batches[2].x);
}

TEST(Tasks, HeadReinitBodyCopied) {
  const auto src = pretrained_source();
  const auto t = sample_task(src, 3);
  ASSERT_EQ(t.theta0.size(), 4u);
  EXPECT_EQ(t.theta0[0], (*src.checkpoint)[0]);
  EXPECT_EQ(t.theta0[1], (*src.checkpoint)[1]);
  EXPECT_EQ(t.theta0[2].shape, (std::vector<std::size_t>{32, 4}));
  EXPECT_NE((*src.checkpoint)[2].shape, t.theta0[2].shape);
  for (double x : t.theta0[3].data) EXPECT_EQ(x, 0.0);
}

TEST(Pretrain, ZeroStepsIsInit) {
  const TaskDistributionSpec d;
  const auto r = pretrain_checkpoint(d, {32}, 0, 4);
  EXPECT_EQ(r.params, init_params(pretrain_network(d, {32}), derive_seed({tag(Stream::Pretrain), 4, 0})));
}

TEST(Pretrain, DeterministicAndAccurate) {
  const TaskDistributionSpec d;
  const auto a = pretrain_checkpoint(d, {32}, 500, 1), b = pretrain_checkpoint(d, {32}, 500, 1);
  EXPECT_EQ(a.params, b.params);
  EXPECT_GE(a.eval_accuracy, 0.9);
}

TEST(InnerLoop, ZeroStepsIsInitialLoss) {
  TaskSource src;
  const auto t = sample_task(src, 4, 0);
  const auto r = inner_loop_eval(baseline_handle({BaselineKind::AdamConst, 0.01, false}).make, t);
  EXPECT_EQ(r.meta_loss, cross_entropy(forward(t.spec, t.theta0, t.eval_batch.x), t.eval_batch.y));
  EXPECT_EQ(r.theta_final, t.theta0);
}

TEST(InnerLoop, AdamSolvesSeparableTwoClassTask) {
  TaskSource src;
  src.dist.classes_per_task = 2;
  src.split = Split::MetaTest;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto t = sample_task(src, s, 30);
    // Oracle Adam run on the same task.
    const auto th = oracle::vanilla_adam(t, 1e-2);
    const auto logits = forward(t.spec, th, t.eval_batch.x);
    EXPECT_GE(accuracy(logits, t.eval_batch.y), 0.95);
    const auto r = run_baseline(t, {BaselineKind::AdamConst, 1e-2, false});
    EXPECT_LT(oracle::max_abs_diff(r.theta_final, th), 1e-12);
  }
}

TEST(InnerLoop, DivergenceGivesPenalty) {
  TaskSource src;
  const auto t = sample_task(src, 1, 5);
  const auto r = run_baseline(t, {BaselineKind::SgdConst, 1e200, false});
  EXPECT_EQ(r.meta_loss, kDivergencePenalty);
}

TEST(InnerLoop, HugeFiniteLossIsCappedAtPenalty) {
  TaskSource src;
  auto t = sample_task(src, 2, 0);
  auto& head = t.theta0[t.theta0.size() - 2];
  for (double& w : head.data) w *= 1e7;
  const double raw = cross_entropy(forward(t.spec, t.theta0, t.eval_batch.x), t.eval_batch.y);
  ASSERT_TRUE(std::isfinite(raw));
  ASSERT_GT(raw, kDivergencePenalty);
  const auto r = inner_loop_eval(baseline_handle({BaselineKind::SgdConst, 0.1, false}).make, t);
  EXPECT_EQ(r.meta_loss, kDivergencePenalty);
  EXPECT_TRUE(r.diverged);
}

TEST(InnerLoop, MalformedTaskThrows) {
  TaskSource src;
  auto t = sample_task(src, 1, 5);
  t.train_batches.pop_back();
  EXPECT_THROW(run_baseline(t, {BaselineKind::SgdConst, 0.1, false}), ConfigError);
}

TEST(Fitness, Arithmetic) {
  const std::vector<double> one{0.7}, two{1.0, 3.0}, swapped{3.0, 1.0};
  EXPECT_EQ(fitness_from_losses(one), -0.7);
  EXPECT_EQ(fitness_from_losses(two), -2.0);
  EXPECT_EQ(fitness_from_losses(swapped), fitness_from_losses(two));
  TaskSource src;
  std::vector<Task> tasks{sample_task(src, 1), sample_task(src, 2)};
  const auto h = baseline_handle({BaselineKind::AdamConst, 0.01, false});
  const double f = fitness(h.make, tasks);
  std::reverse(tasks.begin(), tasks.end());
  EXPECT_NEAR(fitness(h.make, tasks), f, 1e-15);
  EXPECT_NEAR(fitness(h.make, {tasks[0]}), -inner_loop_eval(h.make, tasks[0]).meta_loss, 1e-15);
}

TEST(MetaTrain, ZeroGenerationsKeepsInit) {
  NesConfig cfg;
  cfg.generations = 0;
  cfg.population = 4;
  const Layout l;
  const auto s0 = initial_nes_state(l, 3);
  const auto s = meta_train(cfg, pretrained_source(), l, s0);
  EXPECT_EQ(s.psi, s0.psi);
  EXPECT_TRUE(s.history.empty());
}

TEST(MetaTrain, HistoryLengthAndWorkerIndependence) {
  NesConfig cfg;
  cfg.generations = 3;
  cfg.population = 4;
  cfg.meta_batch = 2;
  cfg.seed = 11;
  const Layout l;
  const auto src = pretrained_source();
  const auto a = meta_train(cfg, src, l, initial_nes_state(l, 3), {1, 50, {}});
  const auto b = meta_train(cfg, src, l, initial_nes_state(l, 3), {4, 50, {}});
  EXPECT_EQ(a.history.size(), 3u);
  EXPECT_EQ(a.psi, b.psi);
  EXPECT_EQ(a.history, b.history);
}

TEST(MetaTrain, ResumeMatchesUninterrupted) {
  NesConfig cfg;
  cfg.generations = 4;
  cfg.population = 4;
  cfg.meta_batch = 1;
  cfg.seed = 5;
  const Layout l;
  const auto src = pretrained_source();
  const auto full = meta_train(cfg, src, l, initial_nes_state(l, 2));
  NesConfig half = cfg;
  half.generations = 2;
  const auto mid = meta_train(half, src, l, initial_nes_state(l, 2));
  const auto resumed = meta_train(cfg, src, l, mid);
  EXPECT_EQ(resumed.psi, full.psi);
  EXPECT_EQ(resumed.history, full.history);
}

TEST(MetaTrain, SharedTasksPerGeneration) {
  NesConfig cfg;
  cfg.meta_batch = 3;
  cfg.seed = 9;
  TaskSource src;
  const auto a = generation_tasks(src, cfg, 4), b = generation_tasks(src, cfg, 4), c = generation_tasks(src, cfg, 5);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[2].eval_batch.x, b[2].eval_batch.x);
  EXPECT_NE(a[0].eval_batch.x, c[0].eval_batch.x);
}

TEST(Parallel, RethrowsAndCoversAllIndices) {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 7, [&](std::size_t i) { hit[i] += 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 5) throw std::runtime_error("x"); }),
               std::runtime_error);
}
