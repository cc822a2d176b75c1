// l3rs: pretrain, meta-train, evaluate, inspect, ablate, report.
//
// Every run reads one JSON config (optional; defaults otherwise). Flags are
// overrides of config keys; --set key.path=value reaches any of them.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "l3rs/cli.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "JSON run config")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "config override key.path=value (repeatable)");
  app->add_option("-w,--workers", c.workers, "evaluator threads (results do not depend on it)");
  app->add_option("-o,--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "master seed");
}

l3rs::RunConfig resolve(const Common& c, std::vector<std::string> extra = {}) {
  std::vector<std::string> sets = c.sets;
  if (c.workers) sets.push_back("workers=" + std::to_string(*c.workers));
  if (c.out) sets.push_back("output_dir=" + l3rs::json(*c.out).dump());
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  for (auto& e : extra) sets.push_back(std::move(e));
  return l3rs::load_run_config(c.config, sets);
}

// "adam-const@0.01" or "adam-cosine-head@1e-3"
l3rs::BaselineSpec parse_baseline_flag(const std::string& s) {
  const auto at = s.find('@');
  if (at == std::string::npos) throw l3rs::ConfigError("baseline must look like kind[-head]@lr, got '" + s + "'");
  std::string kind = s.substr(0, at);
  bool head = false;
  if (kind.size() > 5 && kind.ends_with("-head")) {
    head = true;
    kind.resize(kind.size() - 5);
  }
  l3rs::BaselineSpec b{l3rs::parse_baseline_kind(kind), std::stod(s.substr(at + 1)), head};
  if (!(b.lr > 0.0)) throw l3rs::ConfigError("baseline lr must be positive");
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L3RS learned optimizer: meta-training and evaluation on synthetic tasks"};
  app.require_subcommand(1);

  Common common;

  auto* pre = app.add_subcommand("pretrain", "train the shared body checkpoint");
  add_common(pre, common);
  bool pre_alt = false;
  std::optional<std::int64_t> pre_steps;
  pre->add_flag("--alt", pre_alt, "use the alternate distribution");
  pre->add_option("--steps", pre_steps, "pretraining steps");

  auto* mt = app.add_subcommand("meta-train", "run NES over sampled tasks");
  add_common(mt, common);
  std::string resume;
  std::optional<std::int64_t> generations;
  mt->add_option("--resume", resume, "continue from a psi checkpoint")->check(CLI::ExistingFile);
  mt->add_option("-g,--generations", generations, "total generations");

  auto* ev = app.add_subcommand("evaluate", "evaluate a psi checkpoint and/or baselines");
  add_common(ev, common);
  l3rs::cli::EvaluateOptions eopts;
  std::vector<std::string> baseline_flags;
  bool no_baselines = false;
  std::optional<std::string> split, init, dist;
  ev->add_option("--psi", eopts.psi_path, "psi checkpoint (omit for baselines only)")->check(CLI::ExistingFile);
  ev->add_option("--baseline", baseline_flags, "baseline kind[-head]@lr (repeatable; replaces the config list)");
  ev->add_flag("--no-baselines", no_baselines, "skip baselines");
  ev->add_option("--paired", eopts.paired_reference, "eval_per_task.csv of a reference run")->check(CLI::ExistingFile);
  ev->add_option("--split", split, "metatrain | metatest");
  ev->add_option("--init", init, "pretrained | alt-pretrained | random");
  ev->add_option("--distribution", dist, "primary | alt");

  auto* in = app.add_subcommand("inspect", "log mu/lambda trajectories and time-feature curves");
  add_common(in, common);
  std::string inspect_psi;
  std::uint64_t task_seed = 0;
  std::optional<std::int64_t> inspect_K;
  in->add_option("--psi", inspect_psi, "psi checkpoint")->required()->check(CLI::ExistingFile);
  in->add_option("--task-seed", task_seed, "task seed");
  in->add_option("-K,--steps", inspect_K, "inner steps (default: sampled)");

  auto* ab = app.add_subcommand("ablate", "run the ablation battery");
  add_common(ab, common);

  auto* rep = app.add_subcommand("report", "merge eval_report.csv files into one table");
  std::vector<std::string> inputs;
  std::string report_out;
  rep->add_option("inputs", inputs, "eval_report.csv files")->required()->check(CLI::ExistingFile);
  rep->add_option("-o,--out", report_out, "output CSV (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      std::vector<std::string> extra;
      if (pre_steps) extra.push_back("pretrain.steps=" + std::to_string(*pre_steps));
      const auto out = l3rs::cli::cmd_pretrain(resolve(common, extra), pre_alt);
      std::cout << out.metrics_line << "\n" << "wrote " << out.checkpoint.string() << "\n";
    } else if (*mt) {
      std::vector<std::string> extra;
      if (generations) extra.push_back("nes.generations=" + std::to_string(*generations));
      const auto cfg = resolve(common, extra);
      const auto out = l3rs::cli::cmd_meta_train(cfg, resume);
      const auto& last = out.state.history.back();
      std::cout << "generation " << last.generation << " mean_fitness=" << l3rs::format_double(last.mean_fitness)
                << "\nwrote " << out.final_checkpoint.string() << "\n";
    } else if (*ev) {
      std::vector<std::string> extra;
      if (split) extra.push_back("evaluation.split=" + l3rs::json(*split).dump());
      if (init) extra.push_back("evaluation.init=" + l3rs::json(*init).dump());
      if (dist) extra.push_back("evaluation.distribution=" + l3rs::json(*dist).dump());
      const auto cfg = resolve(common, extra);
      if (no_baselines) {
        eopts.baselines = std::vector<l3rs::BaselineSpec>{};
      } else if (!baseline_flags.empty()) {
        std::vector<l3rs::BaselineSpec> b;
        for (const auto& f : baseline_flags) b.push_back(parse_baseline_flag(f));
        eopts.baselines = b;
      }
      const auto out = l3rs::cli::cmd_evaluate(cfg, eopts);
      std::cout << l3rs::report_csv(out.report);
    } else if (*in) {
      const auto cfg = resolve(common);
      const auto out = l3rs::cli::cmd_inspect(cfg, inspect_psi, task_seed, inspect_K);
      std::cout << "inspected task seed " << task_seed << " K=" << out.task.K << " rows=" << out.trajectory.rows.size()
                << "\n";
    } else if (*ab) {
      const auto rows = l3rs::cli::cmd_ablate(resolve(common));
      std::cout << l3rs::ablation_csv(rows);
    } else if (*rep) {
      const auto table = l3rs::cli::cmd_report(inputs, report_out);
      if (report_out.empty()) std::cout << table;
    }
  } catch (const std::exception& e) {
    std::cerr << "l3rs: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
