#pragma once

// Natural evolution strategies with antithetic sampling and centered-rank
// fitness shaping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "l3rs/error.hpp"
#include "l3rs/rng.hpp"

namespace l3rs {

struct NesConfig {
  std::size_t population = 32;
  double sigma = 0.05;
  double meta_lr = 0.02;
  std::int64_t generations = 2000;
  std::size_t meta_batch = 4;
  std::int64_t decay_period = 500;
  double decay_factor = 0.5;
  // Continuous factor^(g/period) instead of a step every period.
  bool smooth_decay = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (population < 2 || population % 2 != 0) throw ConfigError("population must be even and >= 2");
    if (!(sigma > 0.0) || !(meta_lr > 0.0)) throw ConfigError("sigma and meta_lr must be > 0");
    if (generations < 0) throw ConfigError("generations must be >= 0");
    if (meta_batch < 1) throw ConfigError("meta_batch must be >= 1");
    if (decay_period < 1) throw ConfigError("decay_period must be >= 1");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  }

  double decay(std::int64_t generation) const {
    const double periods = smooth_decay ? static_cast<double>(generation) / static_cast<double>(decay_period)
                                        : static_cast<double>(generation / decay_period);
    return std::pow(decay_factor, periods);
  }

  double sigma_at(std::int64_t generation) const { return sigma * decay(generation); }
  double meta_lr_at(std::int64_t generation) const { return meta_lr * decay(generation); }

  bool operator==(const NesConfig&) const = default;
};

struct GenerationRecord {
  std::int64_t generation = 0;
  double mean_fitness = 0.0;
  double best_fitness = 0.0;
  double alpha = 0.0;
  double sigma = 0.0;

  bool operator==(const GenerationRecord&) const = default;
};

struct NesState {
  std::vector<double> psi;
  std::int64_t generation = 0;
  std::vector<GenerationRecord> history;
};

// Centered ranks: rank/(c-1) - 0.5 with ties broken by index, returned in
// input order.
inline std::vector<double> shaped_utilities(std::span<const double> fitness) {
  const std::size_t c = fitness.size();
  if (c < 2) throw ConfigError("fitness shaping needs at least two candidates");
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  std::vector<double> u(c);
  for (std::size_t rank = 0; rank < c; ++rank) {
    u[order[rank]] = static_cast<double>(rank) / static_cast<double>(c - 1) - 0.5;
  }
  return u;
}

// The c/2 base noise vectors of a generation, reproducible from
// (seed, generation, pair).
inline std::vector<std::vector<double>> generation_noise(const NesConfig& cfg, std::int64_t generation,
                                                         std::size_t dim) {
  std::vector<std::vector<double>> eps(cfg.population / 2, std::vector<double>(dim));
  for (std::size_t i = 0; i < eps.size(); ++i) {
    Rng rng(derive_seed({tag(Stream::Perturbation), cfg.seed, static_cast<std::uint64_t>(generation), i}));
    fill_normal(rng, eps[i], 1.0);
  }
  return eps;
}

// Signed perturbation of candidate j: +eps[j/2] for even j, -eps[j/2] for odd.
inline std::vector<std::vector<double>> antithetic_perturbations(const std::vector<std::vector<double>>& eps) {
  std::vector<std::vector<double>> out;
  out.reserve(2 * eps.size());
  for (const auto& e : eps) {
    out.push_back(e);
    std::vector<double> neg(e.size());
    for (std::size_t d = 0; d < e.size(); ++d) neg[d] = -e[d];
    out.push_back(std::move(neg));
  }
  return out;
}

// Evaluates every candidate of one generation; returns their fitness in
// candidate order.
using PopulationEvaluator =
    std::function<std::vector<double>(const std::vector<std::vector<double>>& candidates, std::int64_t generation)>;

inline void nes_generation(NesState& state, const NesConfig& cfg, const PopulationEvaluator& evaluate) {
  const std::int64_t g = state.generation;
  const double sigma = cfg.sigma_at(g);
  const double alpha = cfg.meta_lr_at(g);
  const std::size_t dim = state.psi.size();
  const auto perturbations = antithetic_perturbations(generation_noise(cfg, g, dim));
  const std::size_t c = perturbations.size();

  std::vector<std::vector<double>> candidates(c, state.psi);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t d = 0; d < dim; ++d) candidates[j][d] += sigma * perturbations[j][d];
  }
  const std::vector<double> fit = evaluate(candidates, g);
  if (fit.size() != c) throw ConfigError("evaluator returned the wrong number of fitness values");
  const auto u = shaped_utilities(fit);

  std::vector<double> step(dim, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t d = 0; d < dim; ++d) step[d] += u[j] * perturbations[j][d];
  }
  const double scale = alpha / (static_cast<double>(c) * sigma);
  for (std::size_t d = 0; d < dim; ++d) state.psi[d] += scale * step[d];

  GenerationRecord rec;
  rec.generation = g;
  rec.mean_fitness = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(c);
  rec.best_fitness = *std::max_element(fit.begin(), fit.end());
  rec.alpha = alpha;
  rec.sigma = sigma;
  state.history.push_back(rec);
  ++state.generation;
}

}  // namespace l3rs
