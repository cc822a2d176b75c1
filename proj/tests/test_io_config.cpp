#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "l3rs/l3rs.hpp"

using namespace l3rs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("l3rs_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Format, SeventeenDigitsRoundTrip) {
  Rng rng(1);
  std::vector<double> v(500);
  fill_normal(rng, v, 1e3);
  v.push_back(5e-324);
  v.push_back(std::numeric_limits<double>::max());
  v.push_back(-0.0);
  v.push_back(0.1);
  const auto back = read_double_array(json::parse(format_array(v)));
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(back[i], v[i]);
    EXPECT_EQ(std::signbit(back[i]), std::signbit(v[i]));
  }
  EXPECT_THROW(format_double(std::nan("")), ConfigError);
}

TEST(PsiCheckpoint, RoundTripIsExact) {
  Layout l;
  l.kinds = {OptimizerKind::Adam, OptimizerKind::Lion};
  l.variant = Variant::PerLayerMlp;
  l.gammas = {0.9};
  PsiCheckpoint c{l, 7, "abc", {{0, -1.5, -1.0, 0.02, 0.05}}, flatten(init_meta_params(l, 3))};
  const auto p = scratch("psi") / "psi.json";
  save_psi_checkpoint(p, c);
  const auto r = load_psi_checkpoint(p, l);
  EXPECT_EQ(r.psi, c.psi);
  EXPECT_EQ(r.generation, 7);
  EXPECT_EQ(r.config_hash, "abc");
  EXPECT_EQ(r.history, c.history);
  EXPECT_EQ(r.layout, l);
  EXPECT_EQ(read_text_file(p), psi_checkpoint_text(r));
}

TEST(PsiCheckpoint, LayoutMismatchRejected) {
  const Layout l;
  const auto p = scratch("mismatch") / "psi.json";
  save_psi_checkpoint(p, {l, 0, "", {}, flatten(init_meta_params(l, 1))});
  Layout other = l;
  other.variant = Variant::NoEmbedding;
  EXPECT_THROW(load_psi_checkpoint(p, other), ConfigError);
  other = l;
  other.gammas = {0.9, 0.0};
  EXPECT_THROW(load_psi_checkpoint(p, other), ConfigError);
  auto j = parse_json_file(p);
  j["psi"].erase(0);
  EXPECT_THROW(psi_checkpoint_from_json(j), ConfigError);
}

TEST(ParamsCheckpoint, RoundTrip) {
  const NetworkSpec spec{5, {7, 3}, 2};
  const auto params = init_params(spec, 4);
  const auto p = scratch("params") / "theta.json";
  write_text_file(p, params_checkpoint_text(spec, params, "{\"eval_loss\":1}"));
  const auto r = load_params_checkpoint(p);
  EXPECT_EQ(r.spec, spec);
  EXPECT_EQ(r.params, params);
}

TEST(Csv, ParseWritten) {
  EvalReport r;
  r.n_tasks = 2;
  r.cells.push_back({"adam-const@0.01", 5, {1, 2}, {0.5, 0.75}, {1.0, 0.5}});
  const auto t = parse_csv(report_csv(r));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][t.column("optimizer")], "adam-const@0.01");
  EXPECT_EQ(std::stod(t.rows[0][t.column("mean_acc")]), 0.625);
  EXPECT_EQ(std::stod(t.rows[0][t.column("std_loss")]), 0.25);
  EXPECT_THROW(t.column("nope"), ConfigError);
  const auto pt = parse_csv(per_task_csv(r));
  EXPECT_EQ(pt.rows.size(), 2u);
}

TEST(Config, DefaultsValidate) {
  const auto c = default_run_config();
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.layout.num_components, 4u);
  EXPECT_EQ(c.evaluation.baselines.size(), 8u);
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(config_from_json(json::parse(R"({"sed":1})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"nes":{"popsize":4}})")), ConfigError);
}

TEST(Config, LayoutInconsistencyRejected) {
  EXPECT_THROW(config_from_json(json::parse(R"({"layout":{"base_optimizers":["SGD","SGD"]}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"layout":{"gammas":[0.9,0.5,0.1,0.0]}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"layout":{"variant":"Local"}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"nes":{"population":7}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"schema_version":2})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"evaluation":{"init":"warm"}})")), ConfigError);
}

TEST(Config, OverridesAndHash) {
  json j = json::object();
  apply_override(j, "nes.population=8");
  apply_override(j, "layout.variant=Global");
  apply_override(j, "evaluation.K_list=[5,7]");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.nes.population, 8u);
  EXPECT_EQ(c.layout.variant, Variant::Global);
  EXPECT_EQ(c.evaluation.K_list, (std::vector<std::int64_t>{5, 7}));
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);

  auto w = c;
  w.workers = 8;
  w.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(w), config_hash(c));
  w.seed = 99;
  EXPECT_NE(config_hash(w), config_hash(c));
}

TEST(Config, ModelDepthSetsComponentCount) {
  const auto c = config_from_json(json::parse(R"({"model":{"hidden":[16,8]}})"));
  EXPECT_EQ(c.layout.num_components, 6u);
}
