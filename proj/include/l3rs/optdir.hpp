#pragma once

// Base optimizers as direction providers. Every direction is a descent step:
// the update a unit-learning-rate optimizer would add to the weights.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "l3rs/error.hpp"
#include "l3rs/nn.hpp"
#include "l3rs/tensor.hpp"

namespace l3rs {

enum class OptimizerKind { Sgd, Adam, Adamax, Lion, Lamb, WeightDecay };

inline constexpr double kAdamEpsilon = 1e-8;
inline constexpr double kNormFloor = 1e-12;

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return "SGD";
    case OptimizerKind::Adam: return "Adam";
    case OptimizerKind::Adamax: return "Adamax";
    case OptimizerKind::Lion: return "Lion";
    case OptimizerKind::Lamb: return "LAMB";
    case OptimizerKind::WeightDecay: return "WeightDecay";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
  for (auto k : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Adamax, OptimizerKind::Lion,
                 OptimizerKind::Lamb, OptimizerKind::WeightDecay}) {
    std::string a(to_string(k)), b(s);
    std::transform(a.begin(), a.end(), a.begin(), ::tolower);
    std::transform(b.begin(), b.end(), b.begin(), ::tolower);
    if (a == b) return k;
  }
  throw ConfigError("unknown optimizer kind '" + std::string(s) + "'");
}

// Number of meta-learned hyperparameters (beta1, beta2) a kind exposes.
inline std::size_t hyper_count(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Adam:
    case OptimizerKind::Adamax:
    case OptimizerKind::Lion:
    case OptimizerKind::Lamb: return 2;
    default: return 0;
  }
}

// Persistent per-parameter state tensors a kind keeps.
inline std::size_t state_slots(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Adam:
    case OptimizerKind::Adamax:
    case OptimizerKind::Lamb: return 2;
    case OptimizerKind::Lion: return 1;
    default: return 0;
  }
}

struct HyperParams {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double eps = kAdamEpsilon;

  bool operator==(const HyperParams&) const = default;
};

inline HyperParams default_hyper(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Adam:
    case OptimizerKind::Adamax:
    case OptimizerKind::Lamb: return {0.9, 0.999, kAdamEpsilon};
    case OptimizerKind::Lion: return {0.9, 0.99, kAdamEpsilon};
    default: return {};
  }
}

// First and second moment (or infinity norm for Adamax) for one component.
struct MomentState {
  Tensor m;
  Tensor v;
};

inline Tensor dir_sgd(const Tensor& grad) {
  Tensor d = grad;
  for (double& x : d.data) x = -x;
  return d;
}

// k is the post-increment step count (k >= 1).
inline Tensor dir_adam(MomentState& s, const Tensor& grad, const HyperParams& hp, std::int64_t k) {
  if (s.m.size() != grad.size()) s.m = zeros_like(grad);
  if (s.v.size() != grad.size()) s.v = zeros_like(grad);
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(k));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(k));
  Tensor d(grad.shape);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad.data[i];
    s.m.data[i] = hp.beta1 * s.m.data[i] + (1.0 - hp.beta1) * g;
    s.v.data[i] = hp.beta2 * s.v.data[i] + (1.0 - hp.beta2) * g * g;
    d.data[i] = -(s.m.data[i] / c1) / (std::sqrt(s.v.data[i] / c2) + hp.eps);
  }
  return d;
}

inline Tensor dir_adamax(MomentState& s, const Tensor& grad, const HyperParams& hp, std::int64_t k) {
  if (s.m.size() != grad.size()) s.m = zeros_like(grad);
  if (s.v.size() != grad.size()) s.v = zeros_like(grad);
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(k));
  Tensor d(grad.shape);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad.data[i];
    s.m.data[i] = hp.beta1 * s.m.data[i] + (1.0 - hp.beta1) * g;
    s.v.data[i] = std::max(hp.beta2 * s.v.data[i], std::abs(g));
    d.data[i] = -(s.m.data[i] / c1) / (s.v.data[i] + hp.eps);
  }
  return d;
}

// sign(0) := 0
inline Tensor dir_lion(MomentState& s, const Tensor& grad, const HyperParams& hp) {
  if (s.m.size() != grad.size()) s.m = zeros_like(grad);
  Tensor d(grad.shape);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad.data[i];
    const double c = hp.beta1 * s.m.data[i] + (1.0 - hp.beta1) * g;
    d.data[i] = c > 0.0 ? -1.0 : (c < 0.0 ? 1.0 : 0.0);
    s.m.data[i] = hp.beta2 * s.m.data[i] + (1.0 - hp.beta2) * g;
  }
  return d;
}

// Adam direction scaled by the trust ratio ||w|| / ||r||; ratio 1 when
// either norm vanishes. No weight-decay term.
inline Tensor dir_lamb(MomentState& s, const Tensor& grad, const HyperParams& hp, std::int64_t k,
                       const Tensor& weights) {
  Tensor d = dir_adam(s, grad, hp, k);
  const double wn = l2_norm(weights);
  const double rn = l2_norm(d);
  const double phi = (wn > 0.0 && rn > 0.0) ? wn / rn : 1.0;
  for (double& x : d.data) x *= phi;
  return d;
}

inline Tensor dir_weight_decay(const Tensor& weights) { return dir_sgd(weights); }

inline double floored_log_norm(double norm) { return std::log(std::max(norm, kNormFloor)); }

// Per component: the P raw directions and their floored log-norms.
struct DirectionSet {
  std::vector<std::vector<Tensor>> dirs;        // [component][p]
  std::vector<std::vector<double>> log_norms;   // [component][p]
  std::vector<std::vector<double>> norms;       // [component][p], unfloored

  std::size_t num_components() const { return dirs.size(); }
};

// A fixed set of base optimizers fed by one shared gradient per step.
class DirectionBank {
 public:
  DirectionBank() = default;

  DirectionBank(std::vector<OptimizerKind> kinds, std::vector<HyperParams> hypers)
      : kinds_(std::move(kinds)), hypers_(std::move(hypers)) {
    if (kinds_.empty()) throw ConfigError("direction bank needs at least one optimizer");
    if (hypers_.size() != kinds_.size()) throw ConfigError("one HyperParams per optimizer kind");
    for (std::size_t i = 0; i < kinds_.size(); ++i) {
      for (std::size_t j = i + 1; j < kinds_.size(); ++j) {
        if (kinds_[i] == kinds_[j]) throw ConfigError("optimizer kind listed twice in bank");
      }
    }
  }

  explicit DirectionBank(std::vector<OptimizerKind> kinds)
      : DirectionBank(kinds, default_hypers(kinds)) {}

  static std::vector<HyperParams> default_hypers(const std::vector<OptimizerKind>& kinds) {
    std::vector<HyperParams> h;
    for (auto k : kinds) h.push_back(default_hyper(k));
    return h;
  }

  const std::vector<OptimizerKind>& kinds() const { return kinds_; }
  const std::vector<HyperParams>& hypers() const { return hypers_; }
  std::size_t size() const { return kinds_.size(); }
  std::int64_t step_count() const { return step_; }

  void reset() {
    step_ = 0;
    state_.clear();
  }

  DirectionSet step(const ParamSet& grads, const ParamSet& weights) {
    if (!grads.same_structure(weights)) throw ShapeError("gradient and weight structure differ");
    if (state_.empty()) state_.assign(grads.size(), std::vector<MomentState>(kinds_.size()));
    if (state_.size() != grads.size()) throw ShapeError("bank used with a different network");
    ++step_;
    DirectionSet out;
    out.dirs.resize(grads.size());
    out.log_norms.resize(grads.size());
    out.norms.resize(grads.size());
    for (std::size_t c = 0; c < grads.size(); ++c) {
      for (std::size_t p = 0; p < kinds_.size(); ++p) {
        Tensor d = direction(kinds_[p], hypers_[p], state_[c][p], grads[c], weights[c]);
        if (!all_finite(d.values())) {
          throw DivergenceError(std::string("non-finite ") + std::string(to_string(kinds_[p])) +
                                " direction in " + grads.components[c].id.name);
        }
        const double n = l2_norm(d);
        out.norms[c].push_back(n);
        out.log_norms[c].push_back(floored_log_norm(n));
        out.dirs[c].push_back(std::move(d));
      }
    }
    return out;
  }

 private:
  Tensor direction(OptimizerKind kind, const HyperParams& hp, MomentState& s, const Tensor& g,
                   const Tensor& w) const {
    switch (kind) {
      case OptimizerKind::Sgd: return dir_sgd(g);
      case OptimizerKind::Adam: return dir_adam(s, g, hp, step_);
      case OptimizerKind::Adamax: return dir_adamax(s, g, hp, step_);
      case OptimizerKind::Lion: return dir_lion(s, g, hp);
      case OptimizerKind::Lamb: return dir_lamb(s, g, hp, step_, w);
      case OptimizerKind::WeightDecay: return dir_weight_decay(w);
    }
    return dir_sgd(g);
  }

  std::vector<OptimizerKind> kinds_;
  std::vector<HyperParams> hypers_;
  std::vector<std::vector<MomentState>> state_;  // [component][p]
  std::int64_t step_ = 0;
};

}  // namespace l3rs
