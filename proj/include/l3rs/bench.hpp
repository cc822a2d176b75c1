#pragma once

// Hand-designed baselines, evaluation suites, speedup and state-size
// accounting, and the ablation battery.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "l3rs/controller.hpp"
#include "l3rs/inner_loop.hpp"
#include "l3rs/learned.hpp"
#include "l3rs/meta.hpp"
#include "l3rs/optdir.hpp"
#include "l3rs/optimizer.hpp"
#include "l3rs/parallel.hpp"
#include "l3rs/tasks.hpp"

namespace l3rs {

// lr0 * 0.5 * (1 + cos(pi * (k - 1) / K)), k in [1, K].
inline double cosine_lr(std::int64_t k, std::int64_t K, double lr0) {
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(k - 1) / static_cast<double>(K)));
}

enum class BaselineKind { AdamConst, AdamCosine, SgdConst };

inline std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::AdamConst: return "adam-const";
    case BaselineKind::AdamCosine: return "adam-cosine";
    case BaselineKind::SgdConst: return "sgd-const";
  }
  return "?";
}

inline BaselineKind parse_baseline_kind(std::string_view s) {
  for (auto k : {BaselineKind::AdamConst, BaselineKind::AdamCosine, BaselineKind::SgdConst}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown baseline '" + std::string(s) + "'");
}

struct BaselineSpec {
  BaselineKind kind = BaselineKind::AdamConst;
  double lr = 1e-3;
  bool head_only = false;

  std::string name() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%s@%g", std::string(to_string(kind)).c_str(), head_only ? "-head" : "",
                  lr);
    return buf;
  }
};

class BaselineOptimizer final : public InnerOptimizer {
 public:
  explicit BaselineOptimizer(BaselineSpec spec) : spec_(spec) {
    if (!(spec_.lr >= 0.0)) throw ConfigError("baseline learning rate must be >= 0");
  }

  void start(const NetworkSpec& net, const ParamSet& /*theta0*/, std::int64_t total_steps) override {
    total_ = total_steps;
    state_.assign(net.num_components(), MomentState{});
    first_trainable_ = spec_.head_only ? net.num_components() - 2 : 0;
  }

  void step(ParamSet& params, const ParamSet& grads, double /*loss*/, std::int64_t k, StepTrace* trace) override {
    const double lr = spec_.kind == BaselineKind::AdamCosine ? cosine_lr(k, total_, spec_.lr) : spec_.lr;
    const HyperParams hp = default_hyper(OptimizerKind::Adam);
    for (std::size_t c = first_trainable_; c < params.size(); ++c) {
      const Tensor d = spec_.kind == BaselineKind::SgdConst ? dir_sgd(grads[c]) : dir_adam(state_[c], grads[c], hp, k);
      if (!all_finite(d.values())) throw DivergenceError("non-finite baseline direction");
      axpy(lr, d, params[c]);
    }
    if (trace) {
      trace->mixes.assign(params.size(), Mix{{}, 0.0});
      for (std::size_t c = first_trainable_; c < params.size(); ++c) trace->mixes[c].lambda = lr;
    }
  }

  double state_slots_per_parameter() const override { return spec_.kind == BaselineKind::SgdConst ? 0.0 : 2.0; }

 private:
  BaselineSpec spec_;
  std::vector<MomentState> state_;
  std::size_t first_trainable_ = 0;
  std::int64_t total_ = 0;
};

inline OptimizerHandle baseline_handle(const BaselineSpec& spec) {
  return {spec.name(), [spec] { return std::make_unique<BaselineOptimizer>(spec); }};
}

struct BaselineRun {
  double meta_loss = 0.0;
  double accuracy = 0.0;
  ParamSet theta_final;
  TrajectoryLog trajectory;
};

inline BaselineRun run_baseline(const Task& task, const BaselineSpec& spec) {
  BaselineOptimizer opt(spec);
  BaselineRun out;
  auto r = inner_loop_eval(opt, task, &out.trajectory);
  out.meta_loss = r.meta_loss;
  out.accuracy = r.eval_accuracy;
  out.theta_final = std::move(r.theta_final);
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Population standard deviation (n in the denominator).
inline MeanStd mean_std(std::span<const double> v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

struct EvalCell {
  std::string optimizer;
  std::int64_t K = 0;
  std::vector<std::uint64_t> task_seeds;
  std::vector<double> accuracy;
  std::vector<double> loss;

  MeanStd acc_stats() const { return mean_std(accuracy); }
  MeanStd loss_stats() const { return mean_std(loss); }
};

struct EvalReport {
  std::vector<EvalCell> cells;
  std::size_t n_tasks = 0;

  const EvalCell* find(const std::string& optimizer, std::int64_t K) const {
    for (const auto& c : cells) {
      if (c.optimizer == optimizer && c.K == K) return &c;
    }
    return nullptr;
  }

  void append(const EvalReport& other) {
    cells.insert(cells.end(), other.cells.begin(), other.cells.end());
    n_tasks = std::max(n_tasks, other.n_tasks);
  }
};

inline std::uint64_t evaluation_task_seed(std::uint64_t eval_seed, std::size_t index) {
  return derive_seed({tag(Stream::Evaluation), eval_seed, index});
}

// The same task seeds are used for every optimizer and every K, so per-task
// differences between optimizers are paired.
inline EvalReport evaluate_suite(const OptimizerHandle& handle, const TaskSource& src, std::size_t n_tasks,
                                 const std::vector<std::int64_t>& K_list, std::uint64_t eval_seed,
                                 std::size_t workers = 1) {
  if (n_tasks < 1) throw ConfigError("evaluation needs at least one task");
  EvalReport report;
  report.n_tasks = n_tasks;
  for (std::int64_t K : K_list) {
    EvalCell cell;
    cell.optimizer = handle.name;
    cell.K = K;
    cell.accuracy.resize(n_tasks);
    cell.loss.resize(n_tasks);
    for (std::size_t i = 0; i < n_tasks; ++i) cell.task_seeds.push_back(evaluation_task_seed(eval_seed, i));
    parallel_for(n_tasks, workers, [&](std::size_t i) {
      const Task task = sample_task(src, cell.task_seeds[i], K);
      const auto r = inner_loop_eval(handle.make, task);
      cell.accuracy[i] = r.eval_accuracy;
      cell.loss[i] = r.meta_loss;
    });
    report.cells.push_back(std::move(cell));
  }
  return report;
}

struct CurvePoint {
  double steps = 0.0;
  double metric = 0.0;
};

// Steps at which a curve first reaches `target`, interpolating linearly in
// log(steps) between neighbouring points.
inline std::optional<double> steps_to_reach(const std::vector<CurvePoint>& curve, double target) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].metric < target) continue;
    if (i == 0 || curve[i].metric == target) return curve[i].steps;
    const auto& a = curve[i - 1];
    const auto& b = curve[i];
    const double t = (target - a.metric) / (b.metric - a.metric);
    return std::exp(std::log(a.steps) + t * (std::log(b.steps) - std::log(a.steps)));
  }
  return std::nullopt;
}

// Percent fewer steps the reference needs: steps_base / steps_ref - 1.
inline std::vector<std::optional<double>> speedup(const std::vector<CurvePoint>& curve_ref,
                                                  const std::vector<CurvePoint>& curve_base,
                                                  const std::vector<double>& targets) {
  std::vector<std::optional<double>> out;
  for (double m : targets) {
    const auto r = steps_to_reach(curve_ref, m);
    const auto b = steps_to_reach(curve_base, m);
    if (r && b) {
      out.push_back((*b / *r - 1.0) * 100.0);
    } else {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

inline std::vector<CurvePoint> accuracy_curve(const EvalReport& report, const std::string& optimizer) {
  std::vector<CurvePoint> c;
  for (const auto& cell : report.cells) {
    if (cell.optimizer == optimizer) c.push_back({static_cast<double>(cell.K), cell.acc_stats().mean});
  }
  std::sort(c.begin(), c.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.steps < b.steps; });
  return c;
}

struct StateSizeReport {
  double slots_ratio = 0.0;
  std::size_t aux_scalars = 0;
  std::size_t parameters = 0;
};

inline StateSizeReport state_size_report(const OptimizerHandle& handle, const NetworkSpec& spec) {
  const auto opt = handle.make();
  return {opt->state_slots_per_parameter(), opt->aux_scalars(spec.num_components()), spec.parameter_count()};
}

// ---------------------------------------------------------------------------
// Ablations

inline std::string base_set_label(const std::vector<OptimizerKind>& kinds) {
  std::string s;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) s += "+";
    s += to_string(kinds[i]);
  }
  return s;
}

inline std::string gamma_label(const std::vector<double>& gammas) {
  if (gammas.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (i) s += "/";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", gammas[i]);
    s += buf;
  }
  return s;
}

// A cartesian block of cells; a battery is a list of blocks.
struct AblationBlock {
  std::vector<std::vector<OptimizerKind>> base_sets;
  std::vector<Variant> variants;
  std::vector<std::vector<double>> gamma_sets;
};

struct AblationConfig {
  std::vector<AblationBlock> blocks;
  NesConfig nes;
  TaskSource train_source;  // K range fixed by the caller, e.g. [10, 10]
  TaskSource eval_source;
  std::size_t n_tasks = 50;
  std::vector<std::int64_t> eval_K{10};
  std::uint64_t eval_seed = 1;
  std::uint64_t init_seed = 1;
  std::size_t workers = 1;
};

struct AblationRow {
  std::string base_set;
  std::string variant;
  std::string gammas;
  std::int64_t K = 0;
  std::size_t meta_params = 0;
  MeanStd acc;
  MeanStd loss;
  // (mu, lambda) identical across all components at every step of the
  // inspection run.
  bool components_identical = false;
  std::vector<double> final_psi;
};

inline bool mixes_identical_across_components(const TrajectoryLog& log) {
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    const auto& a = log.rows[i - 1];
    const auto& b = log.rows[i];
    if (a.step != b.step) continue;
    if (a.mu != b.mu || a.lambda != b.lambda) return false;
  }
  return true;
}

struct AblationCellSpec {
  std::vector<OptimizerKind> kinds;
  Variant variant;
  std::vector<double> gammas;
};

inline std::vector<AblationCellSpec> ablation_cells(const AblationConfig& cfg) {
  std::vector<AblationCellSpec> cells;
  for (const auto& b : cfg.blocks) {
    for (const auto& k : b.base_sets)
      for (auto v : b.variants)
        for (const auto& g : b.gamma_sets) cells.push_back({k, v, g});
  }
  return cells;
}

inline std::vector<AblationRow> run_ablation_battery(const AblationConfig& cfg) {
  std::vector<AblationRow> rows;
  const std::size_t L = cfg.train_source.task_network().num_components();
  for (const auto& cell : ablation_cells(cfg)) {
    Layout layout;
    layout.kinds = cell.kinds;
    layout.variant = cell.variant;
    layout.gammas = cell.gammas;
    layout.num_components = L;
    const NesState trained = meta_train(cfg.nes, cfg.train_source, layout, initial_nes_state(layout, cfg.init_seed),
                                        MetaTrainOptions{cfg.workers, 0, {}});
    auto psi = std::make_shared<const MetaParams>(unflatten(trained.psi, layout));
    const auto handle = l3rs_handle("L3RS", layout, psi);
    const auto report = evaluate_suite(handle, cfg.eval_source, cfg.n_tasks, cfg.eval_K, cfg.eval_seed, cfg.workers);

    TrajectoryLog log;
    const Task probe = sample_task(cfg.eval_source, evaluation_task_seed(cfg.eval_seed, 0), cfg.eval_K.front());
    inner_loop_eval(handle.make, probe, &log);

    for (const auto& c : report.cells) {
      AblationRow row;
      row.base_set = base_set_label(cell.kinds);
      row.variant = std::string(to_string(cell.variant));
      row.gammas = gamma_label(cell.gammas);
      row.K = c.K;
      row.meta_params = layout.flat_size();
      row.acc = c.acc_stats();
      row.loss = c.loss_stats();
      row.components_identical = mixes_identical_across_components(log);
      row.final_psi = trained.psi;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace l3rs
