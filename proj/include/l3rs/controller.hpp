#pragma once

// The meta-parameterized controller: a 32/16 ReLU MLP whose P+1 logits give
// softmax mixing weights over base directions and an exponential step norm.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l3rs/error.hpp"
#include "l3rs/features.hpp"
#include "l3rs/optdir.hpp"
#include "l3rs/rng.hpp"
#include "l3rs/tensor.hpp"

namespace l3rs {

enum class Variant { Full, NoEmbedding, PerLayerMlp, Global };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "Full";
    case Variant::NoEmbedding: return "NoEmbedding";
    case Variant::PerLayerMlp: return "PerLayerMlp";
    case Variant::Global: return "Global";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::Full, Variant::NoEmbedding, Variant::PerLayerMlp, Variant::Global}) {
    if (s == to_string(v)) return v;
  }
  if (s == "Embedding") return Variant::Full;
  throw ConfigError("unknown controller variant '" + std::string(s) + "'");
}

inline constexpr std::size_t kEmbeddingDim = 16;
inline constexpr std::size_t kHidden1 = 32;
inline constexpr std::size_t kHidden2 = 16;
inline constexpr double kInitialStepNorm = 1e-3;

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Everything that fixes the shape of the meta-parameter vector.
struct Layout {
  std::vector<OptimizerKind> kinds{OptimizerKind::Sgd, OptimizerKind::Adam};
  std::size_t num_components = 4;
  std::vector<double> gammas = default_gammas();
  Variant variant = Variant::Full;
  // Rescale the blended direction to norm lambda instead of bounding by it.
  bool renormalize = false;

  std::size_t num_dirs() const { return kinds.size(); }
  bool has_embeddings() const { return variant == Variant::Full; }
  std::size_t num_mlps() const { return variant == Variant::PerLayerMlp ? num_components : 1; }
  std::size_t embedding_rows() const { return has_embeddings() ? num_components : 0; }

  std::size_t feature_dim() const {
    return 3 * gammas.size() + kTimeFeatures + (has_embeddings() ? kEmbeddingDim : 0) + num_dirs();
  }

  std::size_t mlp_size() const {
    const std::size_t f = feature_dim(), out = num_dirs() + 1;
    return f * kHidden1 + kHidden1 + kHidden1 * kHidden2 + kHidden2 + kHidden2 * out + out;
  }

  std::size_t hyper_size() const {
    std::size_t n = 0;
    for (auto k : kinds) n += hyper_count(k);
    return n;
  }

  std::size_t flat_size() const {
    return num_mlps() * mlp_size() + embedding_rows() * kEmbeddingDim + hyper_size();
  }

  void validate() const {
    if (kinds.empty()) throw ConfigError("layout needs at least one base optimizer");
    if (num_components == 0) throw ConfigError("layout needs at least one component");
    (void)DirectionBank(kinds);
    (void)EmaTracker(gammas, 1);
  }

  bool operator==(const Layout&) const = default;
};

struct ControllerMlp {
  Tensor w1, b1, w2, b2, w3, b3;

  static ControllerMlp zeros(std::size_t features, std::size_t outputs) {
    return {Tensor({features, kHidden1}), Tensor({kHidden1}), Tensor({kHidden1, kHidden2}),
            Tensor({kHidden2}),           Tensor({kHidden2, outputs}), Tensor({outputs})};
  }

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t output_dim() const { return b3.size(); }

  bool operator==(const ControllerMlp&) const = default;
};

struct MetaParams {
  std::vector<ControllerMlp> mlps;  // one shared, or one per component
  Tensor embeddings;                // [L x 16], or [0 x 16] without embeddings
  std::vector<double> hyper_raw;    // squashed by the logistic function

  bool operator==(const MetaParams&) const = default;
};

// Base optimizer hyperparameters recovered from the raw meta-parameters, in
// bank order. Kinds without meta-learned scalars get defaults.
inline std::vector<HyperParams> decode_hypers(const Layout& layout, const MetaParams& psi) {
  std::vector<HyperParams> out;
  std::size_t pos = 0;
  for (auto k : layout.kinds) {
    HyperParams h = default_hyper(k);
    if (hyper_count(k) == 2) {
      h.beta1 = logistic(psi.hyper_raw.at(pos));
      h.beta2 = logistic(psi.hyper_raw.at(pos + 1));
      pos += 2;
    }
    out.push_back(h);
  }
  return out;
}

inline std::vector<double> flatten(const MetaParams& psi) {
  std::vector<double> flat;
  auto put = [&](const Tensor& t) { flat.insert(flat.end(), t.data.begin(), t.data.end()); };
  for (const auto& m : psi.mlps) {
    put(m.w1);
    put(m.b1);
    put(m.w2);
    put(m.b2);
    put(m.w3);
    put(m.b3);
  }
  put(psi.embeddings);
  flat.insert(flat.end(), psi.hyper_raw.begin(), psi.hyper_raw.end());
  return flat;
}

inline MetaParams empty_meta_params(const Layout& layout) {
  MetaParams psi;
  for (std::size_t i = 0; i < layout.num_mlps(); ++i) {
    psi.mlps.push_back(ControllerMlp::zeros(layout.feature_dim(), layout.num_dirs() + 1));
  }
  psi.embeddings = Tensor({layout.embedding_rows(), kEmbeddingDim});
  psi.hyper_raw.assign(layout.hyper_size(), 0.0);
  return psi;
}

inline MetaParams unflatten(std::span<const double> flat, const Layout& layout) {
  if (flat.size() != layout.flat_size()) {
    throw ShapeError("flat meta-parameter length " + std::to_string(flat.size()) + " != layout size " +
                     std::to_string(layout.flat_size()));
  }
  MetaParams psi = empty_meta_params(layout);
  std::size_t pos = 0;
  auto take = [&](Tensor& t) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + t.size()), t.data.begin());
    pos += t.size();
  };
  for (auto& m : psi.mlps) {
    take(m.w1);
    take(m.b1);
    take(m.w2);
    take(m.b2);
    take(m.w3);
    take(m.b3);
  }
  take(psi.embeddings);
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos), flat.end(), psi.hyper_raw.begin());
  return psi;
}

// LeCun-normal hidden layers, a zero output layer with the step-norm logit at
// ln(1e-3), N(0, 0.1^2) embeddings and hyperparameters at their defaults.
inline MetaParams init_meta_params(const Layout& layout, std::uint64_t seed) {
  layout.validate();
  MetaParams psi = empty_meta_params(layout);
  Rng rng(seed);
  for (auto& m : psi.mlps) {
    fill_normal(rng, m.w1.values(), 1.0 / std::sqrt(static_cast<double>(m.w1.rows())));
    fill_normal(rng, m.w2.values(), 1.0 / std::sqrt(static_cast<double>(m.w2.rows())));
    m.b3.data.back() = std::log(kInitialStepNorm);
  }
  fill_normal(rng, psi.embeddings.values(), 0.1);
  std::size_t pos = 0;
  for (auto k : layout.kinds) {
    if (hyper_count(k) == 2) {
      const auto h = default_hyper(k);
      psi.hyper_raw[pos++] = logit(h.beta1);
      psi.hyper_raw[pos++] = logit(h.beta2);
    }
  }
  return psi;
}

// Mixing weights (sum to one) and step norm for one component.
struct Mix {
  std::vector<double> mu;
  double lambda = 0.0;

  bool operator==(const Mix&) const = default;
};

inline std::vector<double> mlp_logits(const ControllerMlp& mlp, std::span<const double> f) {
  if (f.size() != mlp.input_dim()) {
    throw ShapeError("feature length " + std::to_string(f.size()) + " != controller input " +
                     std::to_string(mlp.input_dim()));
  }
  auto layer = [](std::span<const double> in, const Tensor& w, const Tensor& b, bool relu) {
    const std::size_t m = w.cols();
    std::vector<double> out(b.data.begin(), b.data.end());
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double x = in[i];
      if (x == 0.0) continue;
      const double* row = &w.data[i * m];
      for (std::size_t j = 0; j < m; ++j) out[j] += x * row[j];
    }
    if (relu) {
      for (double& v : out) v = std::max(v, 0.0);
    }
    return out;
  };
  const auto h1 = layer(f, mlp.w1, mlp.b1, true);
  const auto h2 = layer(h1, mlp.w2, mlp.b2, true);
  return layer(h2, mlp.w3, mlp.b3, false);
}

// Softmax over the first P logits (max-shifted); lambda = exp(last logit).
inline Mix mix_from_logits(std::span<const double> z) {
  if (z.size() < 2) throw ShapeError("controller needs at least P+1 = 2 logits");
  if (!all_finite(z)) throw DivergenceError("non-finite controller logits");
  const std::size_t p = z.size() - 1;
  const double zmax = *std::max_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(p));
  Mix out;
  out.mu.resize(p);
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    out.mu[i] = std::exp(z[i] - zmax);
    s += out.mu[i];
  }
  for (double& m : out.mu) m /= s;
  out.lambda = std::exp(z[p]);
  if (!std::isfinite(out.lambda)) throw DivergenceError("step norm overflow");
  return out;
}

inline Mix controller_forward(const ControllerMlp& mlp, std::span<const double> features) {
  return mix_from_logits(mlp_logits(mlp, features));
}

// lambda * sum_p mu_p * d_p / |d_p|, zero directions dropped. With
// renormalize the blend is rescaled to norm lambda.
inline Tensor compose_update(double lambda, std::span<const double> mu, const std::vector<Tensor>& dirs,
                             bool renormalize = false) {
  if (mu.size() != dirs.size()) throw ShapeError("one mixing weight per direction");
  if (dirs.empty()) throw ShapeError("compose_update needs at least one direction");
  Tensor out = zeros_like(dirs.front());
  for (std::size_t p = 0; p < dirs.size(); ++p) {
    if (!dirs[p].same_shape(out)) throw ShapeError("directions differ in shape");
    const double n = l2_norm(dirs[p]);
    if (n < kNormFloor) continue;
    axpy(lambda * mu[p] / n, dirs[p], out);
  }
  if (renormalize) {
    const double n = l2_norm(out);
    if (n < kNormFloor) return zeros_like(out);
    for (double& x : out.data) x *= lambda / n;
  }
  return out;
}

}  // namespace l3rs
