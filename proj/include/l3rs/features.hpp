#pragma once

// Controller input features: bias-corrected EMAs of training statistics and
// the relative/absolute time encodings.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "l3rs/error.hpp"

namespace l3rs {

inline const std::vector<double>& default_gammas() {
  static const std::vector<double> g{0.0, 0.9, 0.99};
  return g;
}

// Log-norm statistics of one component, measured before its update.
struct ComponentStats {
  double log_weight_norm = 0.0;
  double log_grad_norm = 0.0;
};

// Bias-corrected EMAs of g*a + (1-g)*x for every smoothing factor, per component for the
// weight/gradient log-norms and once globally for the loss.
class EmaTracker {
 public:
  EmaTracker() = default;

  EmaTracker(std::vector<double> gammas, std::size_t num_components)
      : gammas_(std::move(gammas)),
        weight_(num_components, std::vector<double>(gammas_.size(), 0.0)),
        grad_(num_components, std::vector<double>(gammas_.size(), 0.0)),
        loss_(gammas_.size(), 0.0) {
    if (gammas_.size() > 3) throw ConfigError("at most three EMA smoothing factors");
    for (double g : gammas_) {
      if (!(g >= 0.0 && g < 1.0)) throw ConfigError("EMA smoothing factor must lie in [0, 1)");
    }
  }

  const std::vector<double>& gammas() const { return gammas_; }
  std::size_t num_components() const { return weight_.size(); }
  std::int64_t step_count() const { return k_; }

  // Accumulators plus the step counter.
  std::size_t scalar_count() const {
    return gammas_.size() * (2 * num_components() + 1) + 1;
  }

  // Keeps the bias-corrected means directly: m_k = m_{k-1} + w_k (x - m_{k-1})
  // with w_k = (1-g)/(1-g^k), which equals (g*a + (1-g)*x)/(1-g^k) on the
  // raw accumulator. w_1 = 1, so the first read is the first sample exactly.
  void update(double loss, const std::vector<ComponentStats>& stats) {
    if (stats.size() != num_components()) throw ShapeError("EMA update needs one entry per component");
    ++k_;
    for (std::size_t i = 0; i < gammas_.size(); ++i) {
      const double w = (1.0 - gammas_[i]) / correction(i);
      loss_[i] += w * (loss - loss_[i]);
      for (std::size_t c = 0; c < stats.size(); ++c) {
        weight_[c][i] += w * (stats[c].log_weight_norm - weight_[c][i]);
        grad_[c][i] += w * (stats[c].log_grad_norm - grad_[c][i]);
      }
    }
  }

  double correction(std::size_t i) const {
    if (k_ == 0) throw std::logic_error("EMA read before any update");
    return 1.0 - std::pow(gammas_[i], static_cast<double>(k_));
  }

  double weight(std::size_t c, std::size_t i) const { return checked(weight_[c][i]); }
  double grad(std::size_t c, std::size_t i) const { return checked(grad_[c][i]); }
  double loss(std::size_t i) const { return checked(loss_[i]); }

  // The uncorrected accumulator g*a + (1-g)*x.
  double raw_loss(std::size_t i) const { return loss_[i] * correction(i); }

  // Corrected values for one component, ordered per gamma as
  // (log|w|, log|g|, loss). Length 3*|gammas|.
  std::vector<double> read(std::size_t c) const {
    std::vector<double> out;
    out.reserve(3 * gammas_.size());
    for (std::size_t i = 0; i < gammas_.size(); ++i) {
      out.push_back(weight(c, i));
      out.push_back(grad(c, i));
      out.push_back(loss(i));
    }
    return out;
  }

 private:
  double checked(double v) const {
    if (k_ == 0) throw std::logic_error("EMA read before any update");
    return v;
  }

  std::vector<double> gammas_;
  std::vector<std::vector<double>> weight_;  // [component][gamma]
  std::vector<std::vector<double>> grad_;
  std::vector<double> loss_;
  std::int64_t k_ = 0;
};

struct TimeFeatureConfig {
  std::vector<double> alphas;
  std::vector<double> betas;

  static TimeFeatureConfig defaults() {
    TimeFeatureConfig c;
    for (int i = 0; i <= 10; ++i) c.alphas.push_back(i / 10.0);
    for (int j = -4; j <= -1; ++j) c.betas.push_back(std::pow(10.0, j));
    return c;
  }

  std::size_t size() const { return alphas.size() + betas.size(); }
};

inline constexpr std::size_t kTimeFeatures = 15;

// Relative features tanh(10(k/K - alpha)) then absolute tanh(log(K beta)).
inline std::vector<double> time_features(std::int64_t k, std::int64_t K, const TimeFeatureConfig& cfg) {
  if (K <= 0) throw std::invalid_argument("time features need K >= 1");
  if (k < 1 || k > K) throw std::invalid_argument("time features need 1 <= k <= K");
  std::vector<double> out;
  out.reserve(cfg.size());
  const double progress = static_cast<double>(k) / static_cast<double>(K);
  for (double a : cfg.alphas) out.push_back(std::tanh(10.0 * (progress - a)));
  for (double b : cfg.betas) out.push_back(std::tanh(std::log(static_cast<double>(K) * b)));
  return out;
}

inline std::vector<double> time_features(std::int64_t k, std::int64_t K) {
  static const TimeFeatureConfig cfg = TimeFeatureConfig::defaults();
  return time_features(k, K, cfg);
}

}  // namespace l3rs
