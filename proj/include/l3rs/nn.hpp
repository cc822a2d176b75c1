#pragma once

// Small fully connected classifiers with exact reverse-mode gradients.
// These are the inner models the optimizers train.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "l3rs/error.hpp"
#include "l3rs/rng.hpp"
#include "l3rs/tensor.hpp"

namespace l3rs {

enum class ComponentKind { Kernel, Bias };

struct ComponentId {
  std::size_t index = 0;
  std::string name;
  ComponentKind kind = ComponentKind::Kernel;

  bool operator==(const ComponentId&) const = default;
};

struct Component {
  ComponentId id;
  Tensor value;

  bool operator==(const Component&) const = default;
};

// Ordered parameter tensors: layer0/kernel, layer0/bias, layer1/kernel, ...
// Gradients and optimizer directions share this structure.
struct ParamSet {
  std::vector<Component> components;

  std::size_t size() const { return components.size(); }
  Tensor& operator[](std::size_t i) { return components[i].value; }
  const Tensor& operator[](std::size_t i) const { return components[i].value; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& c : components) n += c.value.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& c : out.components) std::fill(c.value.data.begin(), c.value.data.end(), 0.0);
    return out;
  }

  bool same_structure(const ParamSet& other) const {
    if (size() != other.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (components[i].id != other.components[i].id) return false;
      if (!components[i].value.same_shape(other.components[i].value)) return false;
    }
    return true;
  }

  bool operator==(const ParamSet&) const = default;
};

// MLP classifier: ReLU on hidden layers, identity on the output layer.
struct NetworkSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 1;

  void validate() const {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("network dims must be >= 1");
    for (auto h : hidden) {
      if (h == 0) throw ConfigError("hidden layer width must be >= 1");
    }
  }

  std::size_t num_layers() const { return hidden.size() + 1; }
  std::size_t num_components() const { return 2 * num_layers(); }

  std::size_t fan_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden[layer - 1];
  }
  std::size_t fan_out(std::size_t layer) const {
    return layer == hidden.size() ? output_dim : hidden[layer];
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += (fan_in(l) + 1) * fan_out(l);
    return n;
  }

  bool operator==(const NetworkSpec&) const = default;
};

struct Batch {
  Tensor x;                     // [n x input_dim]
  std::vector<std::size_t> y;   // labels in [0, output_dim)

  std::size_t size() const { return y.size(); }
};

inline ComponentId make_component_id(std::size_t layer, ComponentKind kind) {
  const std::size_t index = 2 * layer + (kind == ComponentKind::Bias ? 1 : 0);
  return {index, "layer" + std::to_string(layer) + (kind == ComponentKind::Bias ? "/bias" : "/kernel"),
          kind};
}

// LeCun-normal kernels (variance 1/fan_in) and zero biases.
inline void init_layer(const NetworkSpec& spec, std::size_t layer, Rng& rng, ParamSet& params) {
  Tensor& kernel = params[2 * layer];
  fill_normal(rng, kernel.values(), 1.0 / std::sqrt(static_cast<double>(spec.fan_in(layer))));
  Tensor& bias = params[2 * layer + 1];
  std::fill(bias.data.begin(), bias.data.end(), 0.0);
}

inline ParamSet zero_params(const NetworkSpec& spec) {
  spec.validate();
  ParamSet p;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    p.components.push_back({make_component_id(l, ComponentKind::Kernel),
                            Tensor({spec.fan_in(l), spec.fan_out(l)})});
    p.components.push_back({make_component_id(l, ComponentKind::Bias), Tensor({spec.fan_out(l)})});
  }
  return p;
}

inline ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
  ParamSet p = zero_params(spec);
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) init_layer(spec, l, rng, p);
  return p;
}

namespace detail {

inline void check_params(const NetworkSpec& spec, const ParamSet& params) {
  if (params.size() != spec.num_components()) throw ShapeError("parameter count does not match network");
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto& k = params[2 * l];
    const auto& b = params[2 * l + 1];
    if (k.shape != std::vector<std::size_t>{spec.fan_in(l), spec.fan_out(l)} ||
        b.shape != std::vector<std::size_t>{spec.fan_out(l)}) {
      throw ShapeError("parameter shapes do not match network at layer " + std::to_string(l));
    }
  }
}

// out[n x m] = in[n x d] * W[d x m] + b[m]
inline Tensor dense(const Tensor& in, const Tensor& w, const Tensor& b) {
  const std::size_t n = in.rows(), d = in.cols(), m = w.cols();
  Tensor out({n, m});
  for (std::size_t r = 0; r < n; ++r) {
    double* o = &out.data[r * m];
    for (std::size_t j = 0; j < m; ++j) o[j] = b.data[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = in.data[r * d + i];
      if (xi == 0.0) continue;
      const double* wrow = &w.data[i * m];
      for (std::size_t j = 0; j < m; ++j) o[j] += xi * wrow[j];
    }
  }
  return out;
}

// Forward pass keeping every layer's post-activation output.
inline std::vector<Tensor> forward_all(const NetworkSpec& spec, const ParamSet& params, const Tensor& x) {
  check_params(spec, params);
  if (x.shape.size() != 2 || x.cols() != spec.input_dim) {
    throw ShapeError("input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(spec.input_dim));
  }
  std::vector<Tensor> acts;
  acts.reserve(spec.num_layers() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    Tensor z = dense(acts.back(), params[2 * l], params[2 * l + 1]);
    if (l + 1 < spec.num_layers()) {
      for (double& v : z.data) v = std::max(v, 0.0);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace detail

inline Tensor forward(const NetworkSpec& spec, const ParamSet& params, const Tensor& x) {
  return std::move(detail::forward_all(spec, params, x).back());
}

// Mean softmax cross-entropy, computed with a max-shifted log-sum-exp.
inline double cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  const std::size_t n = logits.rows(), c = logits.cols();
  if (labels.size() != n) throw ShapeError("label count does not match logits");
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = &logits.data[r * c];
    const double zmax = *std::max_element(z, z + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(z[j] - zmax);
    if (labels[r] >= c) throw ShapeError("label out of range");
    total += zmax + std::log(s) - z[labels[r]];
  }
  return total / static_cast<double>(n);
}

struct LossAndGrad {
  double loss = 0.0;
  ParamSet grads;
};

inline LossAndGrad loss_and_grad(const NetworkSpec& spec, const ParamSet& params, const Batch& batch) {
  if (batch.size() == 0) throw ShapeError("empty batch");
  const auto acts = detail::forward_all(spec, params, batch.x);
  const Tensor& logits = acts.back();
  const std::size_t n = logits.rows(), c = logits.cols();

  // dL/dlogits = (softmax - onehot) / n
  Tensor delta({n, c});
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = &logits.data[r * c];
    const double zmax = *std::max_element(z, z + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(z[j] - zmax);
    if (batch.y[r] >= c) throw ShapeError("label out of range");
    total += zmax + std::log(s) - z[batch.y[r]];
    for (std::size_t j = 0; j < c; ++j) {
      delta.data[r * c + j] = std::exp(z[j] - zmax) / s / static_cast<double>(n);
    }
    delta.data[r * c + batch.y[r]] -= 1.0 / static_cast<double>(n);
  }
  LossAndGrad out{total / static_cast<double>(n), params.zeros_like()};
  if (!std::isfinite(out.loss)) throw DivergenceError("non-finite training loss");

  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const Tensor& in = acts[l];
    const std::size_t d = in.cols(), m = delta.cols();
    Tensor& gw = out.grads[2 * l];
    Tensor& gb = out.grads[2 * l + 1];
    for (std::size_t r = 0; r < n; ++r) {
      const double* dr = &delta.data[r * m];
      for (std::size_t j = 0; j < m; ++j) gb.data[j] += dr[j];
      for (std::size_t i = 0; i < d; ++i) {
        const double xi = in.data[r * d + i];
        if (xi == 0.0) continue;
        double* g = &gw.data[i * m];
        for (std::size_t j = 0; j < m; ++j) g[j] += xi * dr[j];
      }
    }
    if (l == 0) break;
    // back through W and the ReLU of the previous layer
    const Tensor& w = params[2 * l];
    Tensor prev({n, d});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < d; ++i) {
        if (in.data[r * d + i] <= 0.0) continue;
        double s = 0.0;
        const double* wrow = &w.data[i * m];
        const double* dr = &delta.data[r * m];
        for (std::size_t j = 0; j < m; ++j) s += wrow[j] * dr[j];
        prev.data[r * d + i] = s;
      }
    }
    delta = std::move(prev);
  }
  for (const auto& c : out.grads.components) {
    if (!all_finite(c.value.values())) throw DivergenceError("non-finite gradient in " + c.id.name);
  }
  return out;
}

// Fraction of rows whose argmax (lowest index on ties) equals the label.
inline double accuracy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  const std::size_t n = logits.rows(), c = logits.cols();
  if (labels.size() != n) throw ShapeError("label count does not match logits");
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = &logits.data[r * c];
    const auto best = static_cast<std::size_t>(std::max_element(z, z + c) - z);
    if (best == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace l3rs
