#pragma once

// Run configuration: one JSON document per run. Every CLI flag overrides a
// key of this tree.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "l3rs/bench.hpp"
#include "l3rs/controller.hpp"
#include "l3rs/error.hpp"
#include "l3rs/io.hpp"
#include "l3rs/nes.hpp"
#include "l3rs/tasks.hpp"

namespace l3rs {

inline constexpr int kConfigSchemaVersion = 1;

enum class InitRegime { Pretrained, AltPretrained, Random };

inline InitRegime parse_init_regime(const std::string& s) {
  if (s == "pretrained") return InitRegime::Pretrained;
  if (s == "alt-pretrained") return InitRegime::AltPretrained;
  if (s == "random") return InitRegime::Random;
  throw ConfigError("unknown init regime '" + s + "' (pretrained | alt-pretrained | random)");
}

struct PretrainConfig {
  std::int64_t steps = 500;
  std::uint64_t seed = 1;
  std::string checkpoint;      // optional file; computed in-process when empty
  std::string alt_checkpoint;  // same, for the alternate distribution
};

struct EvaluationConfig {
  std::size_t n_tasks = 50;
  std::vector<std::int64_t> K_list{5, 10, 25, 50, 100};
  std::uint64_t seed = 7;
  Split split = Split::MetaTest;
  std::string init = "pretrained";
  std::string distribution = "primary";  // primary | alt
  std::vector<BaselineSpec> baselines;
};

struct AblationSettings {
  std::vector<AblationBlock> blocks;
  std::int64_t generations = 500;
  std::int64_t decay_period = 100;
  std::int64_t K = 10;
  std::size_t n_tasks = 50;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string output_dir = "run";
  TaskDistributionSpec distribution;
  std::uint64_t alt_generator_seed = 2;
  std::vector<std::size_t> hidden{32};
  PretrainConfig pretrain;
  Layout layout;  // num_components derived from the network
  NesConfig nes;
  std::int64_t checkpoint_every = 50;
  EvaluationConfig evaluation;
  AblationSettings ablation;

  TaskDistributionSpec alt_distribution() const {
    TaskDistributionSpec d = distribution;
    d.generator.seed = alt_generator_seed;
    return d;
  }
};

inline std::vector<BaselineSpec> default_baseline_grid() {
  std::vector<BaselineSpec> out;
  for (auto kind : {BaselineKind::AdamConst, BaselineKind::AdamCosine}) {
    for (double lr : {1e-1, 1e-2, 1e-3, 1e-4}) out.push_back({kind, lr, false});
  }
  return out;
}

inline std::vector<AblationBlock> default_ablation_blocks() {
  using K = OptimizerKind;
  const std::vector<double> g3{0.99, 0.9, 0.0};
  return {
      // base optimizers x controller variants
      {{{K::Sgd}, {K::Adam}, {K::Sgd, K::Adam}},
       {Variant::Full, Variant::NoEmbedding, Variant::PerLayerMlp, Variant::Global},
       {g3}},
      // EMA smoothing-factor sets
      {{{K::Sgd, K::Adam}}, {Variant::Full}, {{0.9, 0.0}, {0.0}, {}}},
      // wider base-optimizer sets
      {{{K::Adam, K::Lion, K::Lamb},
        {K::Adamax, K::Sgd, K::Lamb},
        {K::Sgd, K::Adam, K::Adamax, K::Lion, K::Lamb, K::WeightDecay}},
       {Variant::Full},
       {g3}},
  };
}

// ---------------------------------------------------------------------------
// JSON mapping

inline json kinds_to_json(const std::vector<OptimizerKind>& kinds) {
  json a = json::array();
  for (auto k : kinds) a.push_back(std::string(to_string(k)));
  return a;
}

inline std::vector<OptimizerKind> kinds_from_json(const json& j) {
  std::vector<OptimizerKind> out;
  for (const auto& k : j) out.push_back(parse_optimizer_kind(k.get<std::string>()));
  return out;
}

inline json to_json(const RunConfig& c) {
  const auto& d = c.distribution;
  json baselines = json::array();
  for (const auto& b : c.evaluation.baselines) {
    baselines.push_back({{"kind", std::string(to_string(b.kind))}, {"lr", b.lr}, {"head_only", b.head_only}});
  }
  json blocks = json::array();
  for (const auto& b : c.ablation.blocks) {
    json bs = json::array();
    for (const auto& s : b.base_sets) bs.push_back(kinds_to_json(s));
    json vs = json::array();
    for (auto v : b.variants) vs.push_back(std::string(to_string(v)));
    blocks.push_back({{"base_sets", bs}, {"variants", vs}, {"gamma_sets", b.gamma_sets}});
  }
  return {
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"workers", c.workers},
      {"output_dir", c.output_dir},
      {"distribution",
       {{"input_dim", d.generator.input_dim},
        {"total_classes", d.generator.total_classes},
        {"blob_std", d.generator.blob_std},
        {"generator_seed", d.generator.seed},
        {"alt_generator_seed", c.alt_generator_seed},
        {"pretrain_classes", d.pretrain_classes},
        {"metatrain_classes", d.metatrain_classes},
        {"metatest_classes", d.metatest_classes},
        {"classes_per_task", d.classes_per_task},
        {"train_batch_size", d.train_batch_size},
        {"eval_batch_size", d.eval_batch_size},
        {"k_min", d.k_min},
        {"k_max", d.k_max}}},
      {"model", {{"hidden", c.hidden}}},
      {"pretrain",
       {{"steps", c.pretrain.steps},
        {"seed", c.pretrain.seed},
        {"checkpoint", c.pretrain.checkpoint},
        {"alt_checkpoint", c.pretrain.alt_checkpoint}}},
      {"layout",
       {{"base_optimizers", kinds_to_json(c.layout.kinds)},
        {"variant", std::string(to_string(c.layout.variant))},
        {"gammas", c.layout.gammas},
        {"renormalize", c.layout.renormalize}}},
      {"nes",
       {{"population", c.nes.population},
        {"sigma", c.nes.sigma},
        {"meta_lr", c.nes.meta_lr},
        {"generations", c.nes.generations},
        {"meta_batch", c.nes.meta_batch},
        {"decay_period", c.nes.decay_period},
        {"decay_factor", c.nes.decay_factor},
        {"smooth_decay", c.nes.smooth_decay},
        {"checkpoint_every", c.checkpoint_every}}},
      {"evaluation",
       {{"n_tasks", c.evaluation.n_tasks},
        {"K_list", c.evaluation.K_list},
        {"seed", c.evaluation.seed},
        {"split", std::string(to_string(c.evaluation.split))},
        {"init", c.evaluation.init},
        {"distribution", c.evaluation.distribution},
        {"baselines", baselines}}},
      {"ablation",
       {{"blocks", blocks},
        {"generations", c.ablation.generations},
        {"decay_period", c.ablation.decay_period},
        {"K", c.ablation.K},
        {"n_tasks", c.ablation.n_tasks}}},
  };
}

inline RunConfig default_run_config() {
  RunConfig c;
  c.evaluation.baselines = default_baseline_grid();
  c.ablation.blocks = default_ablation_blocks();
  return c;
}

namespace detail {

// Rejects keys the schema does not know, so typos fail loudly.
inline void check_keys(const json& given, const json& known, const std::string& where) {
  if (!given.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError("unknown config key '" + where + it.key() + "'");
    if (known[it.key()].is_object()) {
      check_keys(it.value(), known[it.key()], where + it.key() + ".");
    }
  }
}

}  // namespace detail

inline std::size_t network_components(const RunConfig& c) { return 2 * (c.hidden.size() + 1); }

// Cross-field checks, run before any compute.
inline void validate(const RunConfig& c) {
  c.distribution.validate();
  NetworkSpec{c.distribution.generator.input_dim, c.hidden, c.distribution.classes_per_task}.validate();
  c.layout.validate();
  if (c.layout.num_components != network_components(c)) {
    throw ConfigError("layout component count does not match the network");
  }
  c.nes.validate();
  if (c.evaluation.n_tasks < 1) throw ConfigError("evaluation.n_tasks must be >= 1");
  for (auto K : c.evaluation.K_list) {
    if (K < 1) throw ConfigError("evaluation.K_list entries must be >= 1");
  }
  if (c.evaluation.split == Split::Pretrain) throw ConfigError("evaluation.split must be metatrain or metatest");
  for (auto s : {Split::MetaTrain, Split::MetaTest}) {
    if (c.distribution.split_size(s) < c.distribution.classes_per_task) {
      throw ConfigError("split " + std::string(to_string(s)) + " is smaller than classes_per_task");
    }
  }
  (void)parse_init_regime(c.evaluation.init);
  if (c.evaluation.distribution != "primary" && c.evaluation.distribution != "alt") {
    throw ConfigError("evaluation.distribution must be primary or alt");
  }
  if (c.pretrain.steps < 0) throw ConfigError("pretrain.steps must be >= 0");
  if (c.checkpoint_every < 1) throw ConfigError("nes.checkpoint_every must be >= 1");
  if (c.ablation.K < 1 || c.ablation.generations < 0 || c.ablation.decay_period < 1 || c.ablation.n_tasks < 1) {
    throw ConfigError("invalid ablation settings");
  }
  for (const auto& b : c.ablation.blocks) {
    for (const auto& k : b.base_sets) (void)DirectionBank(k);
    for (const auto& g : b.gamma_sets) (void)EmaTracker(g, 1);
  }
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c = default_run_config();
  detail::check_keys(j, to_json(c), "");
  if (j.value("schema_version", kConfigSchemaVersion) != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version");
  }
  try {
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("distribution")) {
      const auto& d = j["distribution"];
      auto& t = c.distribution;
      t.generator.input_dim = d.value("input_dim", t.generator.input_dim);
      t.generator.total_classes = d.value("total_classes", t.generator.total_classes);
      t.generator.blob_std = d.value("blob_std", t.generator.blob_std);
      t.generator.seed = d.value("generator_seed", t.generator.seed);
      c.alt_generator_seed = d.value("alt_generator_seed", c.alt_generator_seed);
      t.pretrain_classes = d.value("pretrain_classes", t.pretrain_classes);
      t.metatrain_classes = d.value("metatrain_classes", t.metatrain_classes);
      t.metatest_classes = d.value("metatest_classes", t.metatest_classes);
      t.classes_per_task = d.value("classes_per_task", t.classes_per_task);
      t.train_batch_size = d.value("train_batch_size", t.train_batch_size);
      t.eval_batch_size = d.value("eval_batch_size", t.eval_batch_size);
      t.k_min = d.value("k_min", t.k_min);
      t.k_max = d.value("k_max", t.k_max);
    }
    if (j.contains("model")) c.hidden = j["model"].value("hidden", c.hidden);
    if (j.contains("pretrain")) {
      const auto& p = j["pretrain"];
      c.pretrain.steps = p.value("steps", c.pretrain.steps);
      c.pretrain.seed = p.value("seed", c.pretrain.seed);
      c.pretrain.checkpoint = p.value("checkpoint", c.pretrain.checkpoint);
      c.pretrain.alt_checkpoint = p.value("alt_checkpoint", c.pretrain.alt_checkpoint);
    }
    if (j.contains("layout")) {
      const auto& l = j["layout"];
      if (l.contains("base_optimizers")) c.layout.kinds = kinds_from_json(l["base_optimizers"]);
      if (l.contains("variant")) c.layout.variant = parse_variant(l["variant"].get<std::string>());
      if (l.contains("gammas")) c.layout.gammas = l["gammas"].get<std::vector<double>>();
      c.layout.renormalize = l.value("renormalize", c.layout.renormalize);
    }
    if (j.contains("nes")) {
      const auto& n = j["nes"];
      c.nes.population = n.value("population", c.nes.population);
      c.nes.sigma = n.value("sigma", c.nes.sigma);
      c.nes.meta_lr = n.value("meta_lr", c.nes.meta_lr);
      c.nes.generations = n.value("generations", c.nes.generations);
      c.nes.meta_batch = n.value("meta_batch", c.nes.meta_batch);
      c.nes.decay_period = n.value("decay_period", c.nes.decay_period);
      c.nes.decay_factor = n.value("decay_factor", c.nes.decay_factor);
      c.nes.smooth_decay = n.value("smooth_decay", c.nes.smooth_decay);
      c.checkpoint_every = n.value("checkpoint_every", c.checkpoint_every);
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      c.evaluation.n_tasks = e.value("n_tasks", c.evaluation.n_tasks);
      c.evaluation.K_list = e.value("K_list", c.evaluation.K_list);
      c.evaluation.seed = e.value("seed", c.evaluation.seed);
      if (e.contains("split")) c.evaluation.split = parse_split(e["split"].get<std::string>());
      c.evaluation.init = e.value("init", c.evaluation.init);
      c.evaluation.distribution = e.value("distribution", c.evaluation.distribution);
      if (e.contains("baselines")) {
        c.evaluation.baselines.clear();
        for (const auto& b : e["baselines"]) {
          c.evaluation.baselines.push_back({parse_baseline_kind(b.at("kind").get<std::string>()), b.at("lr").get<double>(),
                                            b.value("head_only", false)});
        }
      }
    }
    if (j.contains("ablation")) {
      const auto& a = j["ablation"];
      c.ablation.generations = a.value("generations", c.ablation.generations);
      c.ablation.decay_period = a.value("decay_period", c.ablation.decay_period);
      c.ablation.K = a.value("K", c.ablation.K);
      c.ablation.n_tasks = a.value("n_tasks", c.ablation.n_tasks);
      if (a.contains("blocks")) {
        c.ablation.blocks.clear();
        for (const auto& b : a["blocks"]) {
          AblationBlock blk;
          for (const auto& s : b.at("base_sets")) blk.base_sets.push_back(kinds_from_json(s));
          for (const auto& v : b.at("variants")) blk.variants.push_back(parse_variant(v.get<std::string>()));
          for (const auto& g : b.at("gamma_sets")) blk.gamma_sets.push_back(g.get<std::vector<double>>());
          c.ablation.blocks.push_back(std::move(blk));
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.layout.num_components = network_components(c);
  if (c.workers == 0) c.workers = 1;
  validate(c);
  return c;
}

// Applies "a.b.c=value"; the value is parsed as JSON, falling back to a
// plain string.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("empty key in override '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  json j = path.empty() ? json::object() : parse_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

// FNV-1a over the canonical config, ignoring keys that must not change
// results (worker count, output location).
inline std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("workers");
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace l3rs
