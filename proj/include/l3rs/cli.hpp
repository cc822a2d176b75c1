#pragma once

// Subcommand implementations behind the l3rs command-line tool. Each one is
// a pure function of its config and input files and writes into
// config.output_dir.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "l3rs/bench.hpp"
#include "l3rs/config.hpp"
#include "l3rs/io.hpp"
#include "l3rs/learned.hpp"
#include "l3rs/meta.hpp"
#include "l3rs/tasks.hpp"

namespace l3rs::cli {

namespace fs = std::filesystem;

inline fs::path out_path(const RunConfig& cfg, const std::string& name) { return fs::path(cfg.output_dir) / name; }

inline void write_config_snapshot(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("workers");
  write_text_file(out_path(cfg, "config.json"), j.dump(2) + "\n");
}

// Pretrained weights for the primary (alt = false) or alternate
// distribution: loaded from the configured file, or trained in-process.
inline std::shared_ptr<const ParamSet> resolve_checkpoint(const RunConfig& cfg, bool alt) {
  const std::string& file = alt ? cfg.pretrain.alt_checkpoint : cfg.pretrain.checkpoint;
  const NetworkSpec expected = pretrain_network(alt ? cfg.alt_distribution() : cfg.distribution, cfg.hidden);
  if (!file.empty()) {
    auto ck = load_params_checkpoint(file);
    if (ck.spec.input_dim != expected.input_dim || ck.spec.hidden != expected.hidden) {
      throw ConfigError(file + ": checkpoint network does not match the configured model");
    }
    return std::make_shared<const ParamSet>(std::move(ck.params));
  }
  return std::make_shared<const ParamSet>(
      pretrain_checkpoint(alt ? cfg.alt_distribution() : cfg.distribution, cfg.hidden, cfg.pretrain.steps,
                          cfg.pretrain.seed)
          .params);
}

inline TaskSource meta_train_source(const RunConfig& cfg) {
  return {cfg.distribution, Split::MetaTrain, cfg.hidden, resolve_checkpoint(cfg, false)};
}

inline TaskSource evaluation_source(const RunConfig& cfg) {
  TaskSource src;
  src.dist = cfg.evaluation.distribution == "alt" ? cfg.alt_distribution() : cfg.distribution;
  src.split = cfg.evaluation.split;
  src.hidden = cfg.hidden;
  switch (parse_init_regime(cfg.evaluation.init)) {
    case InitRegime::Pretrained: src.checkpoint = resolve_checkpoint(cfg, false); break;
    case InitRegime::AltPretrained: src.checkpoint = resolve_checkpoint(cfg, true); break;
    case InitRegime::Random: break;
  }
  return src;
}

// ---------------------------------------------------------------------------

struct PretrainOutput {
  PretrainResult result;
  fs::path checkpoint;
  std::string metrics_line;
};

inline PretrainOutput cmd_pretrain(const RunConfig& cfg, bool alt = false) {
  const auto dist = alt ? cfg.alt_distribution() : cfg.distribution;
  PretrainOutput out;
  out.result = pretrain_checkpoint(dist, cfg.hidden, cfg.pretrain.steps, cfg.pretrain.seed);
  const std::string metrics = "{\"steps\":" + std::to_string(cfg.pretrain.steps) + ",\"eval_loss\":" +
                              format_double(out.result.eval_loss) + ",\"eval_accuracy\":" +
                              format_double(out.result.eval_accuracy) + "}";
  out.checkpoint = out_path(cfg, alt ? "pretrain_alt_checkpoint.json" : "pretrain_checkpoint.json");
  write_text_file(out.checkpoint, params_checkpoint_text(pretrain_network(dist, cfg.hidden), out.result.params, metrics));
  char line[160];
  std::snprintf(line, sizeof(line), "pretrain steps=%lld eval_loss=%.6f eval_accuracy=%.4f",
                static_cast<long long>(cfg.pretrain.steps), out.result.eval_loss, out.result.eval_accuracy);
  out.metrics_line = line;
  write_config_snapshot(cfg);
  return out;
}

// ---------------------------------------------------------------------------

struct MetaTrainOutput {
  NesState state;
  fs::path final_checkpoint;
  fs::path history;
};

inline std::string generation_checkpoint_name(std::int64_t g) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "psi_gen%05lld.json", static_cast<long long>(g));
  return buf;
}

inline MetaTrainOutput cmd_meta_train(const RunConfig& cfg, const std::string& resume = {}) {
  const std::string hash = config_hash(cfg);
  NesState state;
  if (!resume.empty()) {
    const auto ck = load_psi_checkpoint(resume, cfg.layout);
    state.psi = ck.psi;
    state.generation = ck.generation;
    state.history = ck.history;
    if (static_cast<std::int64_t>(state.history.size()) != state.generation) {
      throw ConfigError(resume + ": history length does not match generation");
    }
  } else {
    state = initial_nes_state(cfg.layout, derive_seed({tag(Stream::Init), cfg.seed}));
  }
  NesConfig nes = cfg.nes;
  nes.seed = derive_seed({tag(Stream::Perturbation), cfg.seed});
  const TaskSource src = meta_train_source(cfg);
  write_config_snapshot(cfg);
  auto save = [&](const NesState& s, const fs::path& path) {
    save_psi_checkpoint(path, {cfg.layout, s.generation, hash, s.history, s.psi});
  };
  MetaTrainOptions opts;
  opts.workers = cfg.workers;
  opts.checkpoint_every = cfg.checkpoint_every;
  opts.on_checkpoint = [&](const NesState& s) {
    save(s, out_path(cfg, generation_checkpoint_name(s.generation)));
    write_text_file(out_path(cfg, "history.csv"), history_csv(s.history));
  };
  MetaTrainOutput out;
  out.state = meta_train(nes, src, cfg.layout, std::move(state), opts);
  out.final_checkpoint = out_path(cfg, "psi_final.json");
  out.history = out_path(cfg, "history.csv");
  save(out.state, out.final_checkpoint);
  write_text_file(out.history, history_csv(out.state.history));
  return out;
}

// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string psi_path;                           // empty: baselines only
  std::optional<std::vector<BaselineSpec>> baselines;  // overrides the config list
  std::string paired_reference;                   // per-task CSV of a reference run
  std::string l3rs_name = "L3RS";
};

struct EvaluateOutput {
  EvalReport report;
  json summary;
};

inline std::string paired_csv(const EvalReport& report, const CsvTable& ref) {
  const auto ki = ref.column("K"), ti = ref.column("task_index"), si = ref.column("task_seed"),
             ai = ref.column("acc"), li = ref.column("loss"), oi = ref.column("optimizer");
  std::string s = "optimizer,K,task_index,task_seed,acc,loss,ref_optimizer,ref_acc,ref_loss,diff_acc,diff_loss\n";
  for (const auto& c : report.cells) {
    for (std::size_t i = 0; i < c.accuracy.size(); ++i) {
      for (const auto& row : ref.rows) {
        if (std::stoll(row[ki]) != c.K || std::stoull(row[ti]) != i) continue;
        if (std::stoull(row[si]) != c.task_seeds[i]) throw ConfigError("paired reference used different task seeds");
        const double ra = std::stod(row[ai]), rl = std::stod(row[li]);
        s += c.optimizer + "," + std::to_string(c.K) + "," + std::to_string(i) + "," + std::to_string(c.task_seeds[i]) +
             "," + format_double(c.accuracy[i]) + "," + format_double(c.loss[i]) + "," + row[oi] + "," +
             format_double(ra) + "," + format_double(rl) + "," + format_double(c.accuracy[i] - ra) + "," +
             format_double(c.loss[i] - rl) + "\n";
      }
    }
  }
  return s;
}

inline EvaluateOutput cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opts = {}) {
  const TaskSource src = evaluation_source(cfg);
  std::vector<OptimizerHandle> handles;
  if (!opts.psi_path.empty()) {
    const auto ck = load_psi_checkpoint(opts.psi_path, cfg.layout);
    handles.push_back(
        l3rs_handle(opts.l3rs_name, cfg.layout, std::make_shared<const MetaParams>(unflatten(ck.psi, cfg.layout))));
  }
  for (const auto& b : opts.baselines.value_or(cfg.evaluation.baselines)) handles.push_back(baseline_handle(b));
  if (handles.empty()) throw ConfigError("nothing to evaluate: no checkpoint and no baselines");

  EvaluateOutput out;
  for (const auto& h : handles) {
    out.report.append(evaluate_suite(h, src, cfg.evaluation.n_tasks, cfg.evaluation.K_list, cfg.evaluation.seed,
                                     cfg.workers));
  }
  write_text_file(out_path(cfg, "eval_report.csv"), report_csv(out.report));
  write_text_file(out_path(cfg, "eval_per_task.csv"), per_task_csv(out.report));
  if (!opts.paired_reference.empty()) {
    write_text_file(out_path(cfg, "eval_paired.csv"),
                    paired_csv(out.report, parse_csv(read_text_file(opts.paired_reference))));
  }

  json opt_summary = json::object();
  for (const auto& c : out.report.cells) {
    const auto a = c.acc_stats();
    const auto l = c.loss_stats();
    opt_summary[c.optimizer][std::to_string(c.K)] = {
        {"mean_acc", a.mean}, {"std_acc", a.std}, {"mean_loss", l.mean}, {"std_loss", l.std}};
  }
  json best = json::object();
  for (auto K : cfg.evaluation.K_list) {
    const EvalCell* winner = nullptr;
    for (const auto& c : out.report.cells) {
      if (c.K != K || c.optimizer == opts.l3rs_name) continue;
      if (!winner || c.loss_stats().mean < winner->loss_stats().mean) winner = &c;
    }
    if (winner) best[std::to_string(K)] = {{"optimizer", winner->optimizer}, {"mean_loss", winner->loss_stats().mean}};
  }
  out.summary = {{"config_hash", config_hash(cfg)},
                 {"n_tasks", cfg.evaluation.n_tasks},
                 {"K_list", cfg.evaluation.K_list},
                 {"split", std::string(to_string(cfg.evaluation.split))},
                 {"init", cfg.evaluation.init},
                 {"distribution", cfg.evaluation.distribution},
                 {"optimizers", opt_summary},
                 {"best_baseline_by_loss", best}};
  if (!opts.psi_path.empty()) {
    json sp = json::object();
    const auto ref = accuracy_curve(out.report, opts.l3rs_name);
    std::vector<double> targets;
    for (const auto& p : ref) targets.push_back(p.metric);
    for (const auto& h : handles) {
      if (h.name == opts.l3rs_name) continue;
      const auto s = speedup(ref, accuracy_curve(out.report, h.name), targets);
      json row = json::array();
      for (std::size_t i = 0; i < targets.size(); ++i) {
        row.push_back({{"target_acc", targets[i]}, {"speedup_percent", s[i] ? json(*s[i]) : json(nullptr)}});
      }
      sp[h.name] = row;
    }
    out.summary["speedup_vs"] = sp;
  }
  write_text_file(out_path(cfg, "summary.json"), out.summary.dump(2) + "\n");
  write_config_snapshot(cfg);
  return out;
}

// ---------------------------------------------------------------------------

struct InspectOutput {
  TrajectoryLog trajectory;
  Task task;
};

inline std::vector<std::int64_t> feature_K_grid() {
  return {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000, 20000, 50000, 100000};
}

inline InspectOutput cmd_inspect(const RunConfig& cfg, const std::string& psi_path, std::uint64_t task_seed,
                                 std::optional<std::int64_t> K = {}) {
  const auto ck = load_psi_checkpoint(psi_path, cfg.layout);
  const auto psi = std::make_shared<const MetaParams>(unflatten(ck.psi, cfg.layout));
  InspectOutput out;
  out.task = sample_task(evaluation_source(cfg), task_seed, K);
  L3rsOptimizer opt(cfg.layout, psi);
  inner_loop_eval(opt, out.task, &out.trajectory);
  write_text_file(out_path(cfg, "trajectory.csv"), trajectory_csv(out.trajectory, cfg.layout.num_dirs()));

  std::string avg = "step";
  for (std::size_t p = 0; p < cfg.layout.num_dirs(); ++p) avg += ",mean_mu_" + std::to_string(p);
  avg += ",mean_lambda,loss\n";
  for (const auto& a : out.trajectory.step_averages()) {
    avg += std::to_string(a.step);
    for (double m : a.mu) avg += "," + format_double(m);
    avg += "," + format_double(a.lambda) + "," + format_double(a.loss) + "\n";
  }
  write_text_file(out_path(cfg, "trajectory_avg.csv"), avg);

  const auto tcfg = TimeFeatureConfig::defaults();
  std::string rel = "k,progress";
  for (std::size_t i = 0; i < tcfg.alphas.size(); ++i) rel += ",rel_" + std::to_string(i);
  for (std::size_t j = 0; j < tcfg.betas.size(); ++j) rel += ",abs_" + std::to_string(j);
  rel += "\n";
  const std::int64_t total = std::max<std::int64_t>(out.task.K, 1);
  for (std::int64_t k = 1; k <= total; ++k) {
    rel += std::to_string(k) + "," + format_double(static_cast<double>(k) / static_cast<double>(total));
    for (double f : time_features(k, total, tcfg)) rel += "," + format_double(f);
    rel += "\n";
  }
  write_text_file(out_path(cfg, "time_features.csv"), rel);

  std::string by_K = "K";
  for (std::size_t j = 0; j < tcfg.betas.size(); ++j) by_K += ",abs_" + std::to_string(j);
  by_K += "\n";
  for (auto KK : feature_K_grid()) {
    const auto f = time_features(KK, KK, tcfg);
    by_K += std::to_string(KK);
    for (std::size_t j = 0; j < tcfg.betas.size(); ++j) by_K += "," + format_double(f[tcfg.alphas.size() + j]);
    by_K += "\n";
  }
  write_text_file(out_path(cfg, "time_features_by_K.csv"), by_K);
  return out;
}

// ---------------------------------------------------------------------------

inline AblationConfig ablation_config(const RunConfig& cfg) {
  AblationConfig a;
  a.blocks = cfg.ablation.blocks;
  a.nes = cfg.nes;
  a.nes.generations = cfg.ablation.generations;
  a.nes.decay_period = cfg.ablation.decay_period;
  a.nes.seed = derive_seed({tag(Stream::Perturbation), cfg.seed});
  a.train_source = meta_train_source(cfg);
  a.train_source.dist.k_min = a.train_source.dist.k_max = cfg.ablation.K;
  a.eval_source = evaluation_source(cfg);
  a.n_tasks = cfg.ablation.n_tasks;
  a.eval_K = {cfg.ablation.K};
  a.eval_seed = cfg.evaluation.seed;
  a.init_seed = derive_seed({tag(Stream::Init), cfg.seed});
  a.workers = cfg.workers;
  return a;
}

inline std::vector<AblationRow> cmd_ablate(const RunConfig& cfg) {
  const auto rows = run_ablation_battery(ablation_config(cfg));
  write_text_file(out_path(cfg, "ablation.csv"), ablation_csv(rows));
  write_config_snapshot(cfg);
  return rows;
}

// ---------------------------------------------------------------------------

// Merges eval_report.csv files into one table: a row per K, four columns per
// optimizer.
inline std::string cmd_report(const std::vector<std::string>& inputs, const fs::path& output) {
  std::vector<std::string> optimizers;
  std::map<std::int64_t, std::map<std::string, std::vector<std::string>>> cells;
  for (const auto& in : inputs) {
    const auto t = parse_csv(read_text_file(in));
    const auto oi = t.column("optimizer"), ki = t.column("K");
    const std::size_t cols[] = {t.column("mean_acc"), t.column("std_acc"), t.column("mean_loss"), t.column("std_loss")};
    for (const auto& row : t.rows) {
      const std::string& name = row[oi];
      if (std::find(optimizers.begin(), optimizers.end(), name) == optimizers.end()) optimizers.push_back(name);
      auto& dst = cells[std::stoll(row[ki])][name];
      dst.clear();
      for (auto c : cols) dst.push_back(row[c]);
    }
  }
  std::string s = "K";
  for (const auto& o : optimizers) {
    for (const char* f : {"mean_acc", "std_acc", "mean_loss", "std_loss"}) s += "," + o + ":" + f;
  }
  s += "\n";
  for (const auto& [K, by_opt] : cells) {
    s += std::to_string(K);
    for (const auto& o : optimizers) {
      const auto it = by_opt.find(o);
      for (std::size_t f = 0; f < 4; ++f) s += "," + (it == by_opt.end() ? std::string() : it->second[f]);
    }
    s += "\n";
  }
  if (!output.empty()) write_text_file(output, s);
  return s;
}

}  // namespace l3rs::cli
