#pragma once

// Meta-training of the learned optimizer with NES over sampled tasks.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "l3rs/controller.hpp"
#include "l3rs/inner_loop.hpp"
#include "l3rs/learned.hpp"
#include "l3rs/nes.hpp"
#include "l3rs/parallel.hpp"
#include "l3rs/tasks.hpp"

namespace l3rs {

inline std::uint64_t generation_task_seed(const NesConfig& cfg, std::int64_t generation, std::size_t index) {
  return derive_seed({tag(Stream::Task), cfg.seed, static_cast<std::uint64_t>(generation), index});
}

// The meta-batch shared by every candidate of a generation.
inline std::vector<Task> generation_tasks(const TaskSource& src, const NesConfig& cfg, std::int64_t generation) {
  std::vector<Task> tasks;
  for (std::size_t t = 0; t < cfg.meta_batch; ++t) tasks.push_back(sample_task(src, generation_task_seed(cfg, generation, t)));
  return tasks;
}

// Fitness of flat meta-parameter candidates on the generation's tasks.
// (candidate, task) jobs run on `workers` threads and are reduced in index
// order.
inline PopulationEvaluator l3rs_population_evaluator(TaskSource src, Layout layout, NesConfig cfg,
                                                     std::size_t workers) {
  return [src = std::move(src), layout = std::move(layout), cfg, workers](
             const std::vector<std::vector<double>>& candidates, std::int64_t generation) {
    const auto tasks = generation_tasks(src, cfg, generation);
    std::vector<std::shared_ptr<const MetaParams>> psis(candidates.size());
    parallel_for(candidates.size(), workers, [&](std::size_t j) {
      psis[j] = std::make_shared<const MetaParams>(unflatten(candidates[j], layout));
    });
    const std::size_t b = tasks.size();
    std::vector<double> losses(candidates.size() * b);
    parallel_for(losses.size(), workers, [&](std::size_t job) {
      const std::size_t j = job / b, t = job % b;
      L3rsOptimizer opt(layout, psis[j]);
      losses[job] = inner_loop_eval(opt, tasks[t]).meta_loss;
    });
    std::vector<double> fit(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      fit[j] = fitness_from_losses(std::span<const double>(losses).subspan(j * b, b));
    }
    return fit;
  };
}

struct MetaTrainOptions {
  std::size_t workers = 1;
  std::int64_t checkpoint_every = 50;
  // Called every checkpoint_every generations and after the last one.
  std::function<void(const NesState&)> on_checkpoint;
};

// Runs generations until state.generation == cfg.generations. Starting from a
// resumed state continues exactly as an uninterrupted run would.
inline NesState meta_train(const NesConfig& cfg, const TaskSource& src, const Layout& layout, NesState state,
                           const MetaTrainOptions& opts = {}) {
  cfg.validate();
  layout.validate();
  if (state.psi.size() != layout.flat_size()) throw ShapeError("meta-parameter vector does not match layout");
  const auto evaluate = l3rs_population_evaluator(src, layout, cfg, opts.workers);
  while (state.generation < cfg.generations) {
    nes_generation(state, cfg, evaluate);
    if (opts.on_checkpoint && opts.checkpoint_every > 0 && state.generation % opts.checkpoint_every == 0 &&
        state.generation < cfg.generations) {
      opts.on_checkpoint(state);
    }
  }
  if (opts.on_checkpoint) opts.on_checkpoint(state);
  return state;
}

inline NesState initial_nes_state(const Layout& layout, std::uint64_t seed) {
  NesState s;
  s.psi = flatten(init_meta_params(layout, seed));
  return s;
}

}  // namespace l3rs
