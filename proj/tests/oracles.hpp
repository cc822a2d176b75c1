#pragma once

// Reference implementations used only by the tests. They avoid the library
// code paths they check: the network forward pass is recomputed in long
// double, SGD and Adam are plain loops over flat arrays.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "l3rs/l3rs.hpp"

namespace oracle {

using l3rs::Batch;
using l3rs::NetworkSpec;
using l3rs::ParamSet;

inline long double loss_ld(const NetworkSpec& spec, const ParamSet& p, const Batch& b) {
  const std::size_t n = b.y.size();
  long double total = 0.0L;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<long double> act(spec.input_dim);
    for (std::size_t j = 0; j < spec.input_dim; ++j) act[j] = b.x.at(r, j);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
      const auto& w = p[2 * l];
      const auto& bias = p[2 * l + 1];
      const std::size_t out = spec.fan_out(l);
      std::vector<long double> next(out);
      for (std::size_t o = 0; o < out; ++o) {
        long double s = bias.data[o];
        for (std::size_t i = 0; i < act.size(); ++i) s += act[i] * static_cast<long double>(w.at(i, o));
        next[o] = (l + 1 < spec.num_layers()) ? std::max(s, 0.0L) : s;
      }
      act = std::move(next);
    }
    const long double mx = *std::max_element(act.begin(), act.end());
    long double z = 0.0L;
    for (long double a : act) z += std::exp(a - mx);
    total += mx + std::log(z) - act[b.y[r]];
  }
  return total / static_cast<long double>(n);
}

// Central differences at h and h/2 on every entry, combined by one
// Richardson step so truncation error is O(h^4).
inline ParamSet fd_grad(const NetworkSpec& spec, const ParamSet& p, const Batch& b, double h = 1e-4) {
  ParamSet g = p.zeros_like();
  ParamSet q = p;
  auto central = [&](std::size_t c, std::size_t i, double step) {
    const double x = p[c].data[i];
    q[c].data[i] = x + step;
    const long double up = loss_ld(spec, q, b);
    q[c].data[i] = x - step;
    const long double dn = loss_ld(spec, q, b);
    q[c].data[i] = x;
    const long double width = static_cast<long double>(x + step) - static_cast<long double>(x - step);
    return (up - dn) / width;
  };
  for (std::size_t c = 0; c < p.size(); ++c) {
    for (std::size_t i = 0; i < p[c].size(); ++i) {
      const long double coarse = central(c, i, h), fine = central(c, i, h / 2);
      g[c].data[i] = static_cast<double>((4 * fine - coarse) / 3);
    }
  }
  return g;
}

inline double max_rel_error(const ParamSet& analytic, const ParamSet& fd) {
  double worst = 0.0;
  for (std::size_t c = 0; c < fd.size(); ++c) {
    for (std::size_t i = 0; i < fd[c].size(); ++i) {
      const double a = analytic[c].data[i], f = fd[c].data[i];
      worst = std::max(worst, std::abs(a - f) / (std::abs(f) + 1e-8));
    }
  }
  return worst;
}

// theta_{k+1} = theta_k - eta * g_k.
inline ParamSet vanilla_sgd(const l3rs::Task& task, double eta) {
  ParamSet th = task.theta0;
  for (const auto& batch : task.train_batches) {
    const auto lg = l3rs::loss_and_grad(task.spec, th, batch);
    for (std::size_t c = 0; c < th.size(); ++c) {
      for (std::size_t i = 0; i < th[c].size(); ++i) th[c].data[i] -= eta * lg.grads[c].data[i];
    }
  }
  return th;
}

// Kingma & Ba with bias correction, eps added outside the square root.
inline ParamSet vanilla_adam(const l3rs::Task& task, double eta, double b1 = 0.9, double b2 = 0.999,
                             double eps = 1e-8) {
  ParamSet th = task.theta0;
  ParamSet m = th.zeros_like(), v = th.zeros_like();
  double b1t = 1.0, b2t = 1.0;
  for (const auto& batch : task.train_batches) {
    const auto lg = l3rs::loss_and_grad(task.spec, th, batch);
    b1t *= b1;
    b2t *= b2;
    for (std::size_t c = 0; c < th.size(); ++c) {
      for (std::size_t i = 0; i < th[c].size(); ++i) {
        const double g = lg.grads[c].data[i];
        double& mi = m[c].data[i];
        double& vi = v[c].data[i];
        mi = b1 * mi + (1 - b1) * g;
        vi = b2 * vi + (1 - b2) * g * g;
        th[c].data[i] -= eta * (mi / (1 - b1t)) / (std::sqrt(vi / (1 - b2t)) + eps);
      }
    }
  }
  return th;
}

inline double max_abs_diff(const ParamSet& a, const ParamSet& b) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    for (std::size_t i = 0; i < a[c].size(); ++i) worst = std::max(worst, std::abs(a[c].data[i] - b[c].data[i]));
  }
  return worst;
}

// Hand-written controllers standing in for the learned MLP.

class ZeroStep final : public l3rs::Controller {
 public:
  explicit ZeroStep(std::size_t P) : P_(P) {}
  std::vector<l3rs::Mix> decide(const l3rs::ControlInputs& in) const override {
    return std::vector<l3rs::Mix>(in.params.size(), {std::vector<double>(P_, 1.0 / static_cast<double>(P_)), 0.0});
  }

 private:
  std::size_t P_;
};

// One-hot on direction `pick`; lambda = eta * |g| (use_grad_norm) or
// eta * |d_pick| per component.
class OneHotStub final : public l3rs::Controller {
 public:
  OneHotStub(std::size_t P, std::size_t pick, double eta, bool use_grad_norm)
      : P_(P), pick_(pick), eta_(eta), grad_norm_(use_grad_norm) {}

  std::vector<l3rs::Mix> decide(const l3rs::ControlInputs& in) const override {
    std::vector<l3rs::Mix> out;
    for (std::size_t c = 0; c < in.params.size(); ++c) {
      l3rs::Mix m{std::vector<double>(P_, 0.0), 0.0};
      m.mu[pick_] = 1.0;
      m.lambda = eta_ * (grad_norm_ ? l3rs::l2_norm(in.grads[c]) : in.dirs.norms[c][pick_]);
      out.push_back(m);
    }
    return out;
  }

 private:
  std::size_t P_, pick_;
  double eta_;
  bool grad_norm_;
};

inline ParamSet run_stub(const l3rs::Layout& layout, std::shared_ptr<const l3rs::Controller> ctl,
                         const l3rs::Task& task) {
  l3rs::L3rsOptimizer opt(l3rs::L3rsContext::with_controller(layout, std::move(ctl)));
  return l3rs::inner_loop_eval(opt, task).theta_final;
}

// A small classification task on a random-init network, no checkpoint.
inline l3rs::Task small_task(std::uint64_t seed, std::int64_t K, std::vector<std::size_t> hidden = {8}) {
  l3rs::TaskSource src;
  src.hidden = std::move(hidden);
  return l3rs::sample_task(src, seed, K);
}

}  // namespace oracle
