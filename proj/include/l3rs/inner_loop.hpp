#pragma once

// Inner-loop evaluation: K optimizer steps on a task, then the loss of the
// final weights on the task's evaluation batch.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "l3rs/error.hpp"
#include "l3rs/nn.hpp"
#include "l3rs/optimizer.hpp"
#include "l3rs/tasks.hpp"

namespace l3rs {

inline constexpr double kDivergencePenalty = 1e4;

struct TrajectoryRow {
  std::int64_t step = 0;
  std::size_t component = 0;
  std::vector<double> mu;
  double lambda = 0.0;
  double loss = 0.0;
};

// Per step and component: the mixing weights, step norm and training loss.
struct TrajectoryLog {
  std::vector<TrajectoryRow> rows;

  // Mean over components at each step, as (step, mean mu, mean lambda).
  struct StepAverage {
    std::int64_t step;
    std::vector<double> mu;
    double lambda;
    double loss;
  };

  std::vector<StepAverage> step_averages() const {
    std::vector<StepAverage> out;
    std::size_t count = 0;
    for (const auto& r : rows) {
      if (out.empty() || out.back().step != r.step) {
        if (!out.empty()) {
          for (double& m : out.back().mu) m /= static_cast<double>(count);
          out.back().lambda /= static_cast<double>(count);
        }
        out.push_back({r.step, std::vector<double>(r.mu.size(), 0.0), 0.0, r.loss});
        count = 0;
      }
      for (std::size_t p = 0; p < r.mu.size(); ++p) out.back().mu[p] += r.mu[p];
      out.back().lambda += r.lambda;
      ++count;
    }
    if (!out.empty()) {
      for (double& m : out.back().mu) m /= static_cast<double>(count);
      out.back().lambda /= static_cast<double>(count);
    }
    return out;
  }
};

struct InnerResult {
  double meta_loss = 0.0;
  double eval_accuracy = 0.0;
  bool diverged = false;
  ParamSet theta_final;
};

// Divergence anywhere (non-finite loss, gradient, direction or update)
// yields meta_loss = kDivergencePenalty instead of an error. A finite eval
// loss above the penalty counts as divergence too, so the penalty is the
// worst possible meta-loss.
inline InnerResult inner_loop_eval(InnerOptimizer& opt, const Task& task, TrajectoryLog* log = nullptr) {
  if (static_cast<std::int64_t>(task.train_batches.size()) != task.K) {
    throw ConfigError("task has " + std::to_string(task.train_batches.size()) + " batches but K = " +
                      std::to_string(task.K));
  }
  InnerResult out;
  out.theta_final = task.theta0;
  try {
    opt.start(task.spec, task.theta0, task.K);
    StepTrace trace;
    for (std::int64_t k = 1; k <= task.K; ++k) {
      const auto lg = loss_and_grad(task.spec, out.theta_final, task.train_batches[static_cast<std::size_t>(k - 1)]);
      opt.step(out.theta_final, lg.grads, lg.loss, k, log ? &trace : nullptr);
      if (log) {
        for (std::size_t c = 0; c < trace.mixes.size(); ++c) {
          log->rows.push_back({k, c, trace.mixes[c].mu, trace.mixes[c].lambda, lg.loss});
        }
      }
    }
    const Tensor logits = forward(task.spec, out.theta_final, task.eval_batch.x);
    const double loss = cross_entropy(logits, task.eval_batch.y);
    if (!std::isfinite(loss) || !all_finite(logits.values())) throw DivergenceError("non-finite evaluation loss");
    if (loss > kDivergencePenalty) throw DivergenceError("evaluation loss above the divergence penalty");
    out.meta_loss = loss;
    out.eval_accuracy = accuracy(logits, task.eval_batch.y);
  } catch (const DivergenceError&) {
    out.meta_loss = kDivergencePenalty;
    out.eval_accuracy = 0.0;
    out.diverged = true;
  }
  return out;
}

inline InnerResult inner_loop_eval(const OptimizerFactory& make, const Task& task, TrajectoryLog* log = nullptr) {
  auto opt = make();
  return inner_loop_eval(*opt, task, log);
}

// F = -(1/b) sum of meta-losses.
inline double fitness_from_losses(std::span<const double> meta_losses) {
  double s = 0.0;
  for (double l : meta_losses) s += l;
  return -s / static_cast<double>(meta_losses.size());
}

inline double fitness(const OptimizerFactory& make, const std::vector<Task>& tasks) {
  if (tasks.empty()) throw ConfigError("fitness needs at least one task");
  std::vector<double> losses;
  for (const auto& t : tasks) losses.push_back(inner_loop_eval(make, t).meta_loss);
  return fitness_from_losses(losses);
}

}  // namespace l3rs
