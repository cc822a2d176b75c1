#pragma once

// The learned layer-wise optimizer: per-step statistics tracking, feature
// construction, controller evaluation and the blended update.

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "l3rs/controller.hpp"
#include "l3rs/error.hpp"
#include "l3rs/features.hpp"
#include "l3rs/nn.hpp"
#include "l3rs/optdir.hpp"
#include "l3rs/optimizer.hpp"

namespace l3rs {

struct FeatureFrame {
  std::vector<double> ema;
  std::vector<double> time;
  std::vector<double> embedding;
  std::vector<double> dir_log_norms;

  std::vector<double> concat() const {
    std::vector<double> f;
    f.reserve(ema.size() + time.size() + embedding.size() + dir_log_norms.size());
    f.insert(f.end(), ema.begin(), ema.end());
    f.insert(f.end(), time.begin(), time.end());
    f.insert(f.end(), embedding.begin(), embedding.end());
    f.insert(f.end(), dir_log_norms.begin(), dir_log_norms.end());
    return f;
  }
};

// Order: EMA | time | embedding | direction log-norms. `embedding` may be
// empty for variants without embeddings.
inline FeatureFrame build_features(std::size_t tracker_row, const EmaTracker& tracker, std::int64_t k,
                                   std::int64_t K, const TimeFeatureConfig& cfg,
                                   std::span<const double> embedding, std::span<const double> dir_log_norms) {
  if (tracker.step_count() != k) throw std::logic_error("EMA tracker is not at step k");
  FeatureFrame f;
  f.ema = tracker.read(tracker_row);
  f.time = time_features(k, K, cfg);
  f.embedding.assign(embedding.begin(), embedding.end());
  f.dir_log_norms.assign(dir_log_norms.begin(), dir_log_norms.end());
  return f;
}

struct ControlInputs {
  const std::vector<std::vector<double>>& frames;  // one per component, or one for Global
  const ParamSet& params;                          // pre-update weights
  const ParamSet& grads;
  const DirectionSet& dirs;
  std::int64_t k;
  std::int64_t K;
  double loss;
};

// Maps the features of a step to one Mix per component.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::vector<Mix> decide(const ControlInputs& in) const = 0;
};

class LearnedController final : public Controller {
 public:
  LearnedController(Layout layout, std::shared_ptr<const MetaParams> psi)
      : layout_(std::move(layout)), psi_(std::move(psi)) {
    if (psi_->mlps.size() != layout_.num_mlps()) throw ShapeError("meta-params do not match layout");
    for (const auto& m : psi_->mlps) {
      if (m.input_dim() != layout_.feature_dim() || m.output_dim() != layout_.num_dirs() + 1) {
        throw ShapeError("controller MLP does not match layout feature size");
      }
    }
  }

  std::vector<Mix> decide(const ControlInputs& in) const override {
    const std::size_t L = in.params.size();
    std::vector<Mix> out;
    out.reserve(L);
    if (layout_.variant == Variant::Global) {
      const Mix m = controller_forward(psi_->mlps[0], in.frames.at(0));
      out.assign(L, m);
      return out;
    }
    for (std::size_t c = 0; c < L; ++c) {
      const auto& mlp = layout_.variant == Variant::PerLayerMlp ? psi_->mlps[c] : psi_->mlps[0];
      out.push_back(controller_forward(mlp, in.frames[c]));
    }
    return out;
  }

 private:
  Layout layout_;
  std::shared_ptr<const MetaParams> psi_;
};

// Everything one inner-loop run of the learned optimizer owns.
struct L3rsContext {
  Layout layout;
  std::shared_ptr<const MetaParams> psi;  // source of embeddings; may be null without them
  std::shared_ptr<const Controller> controller;
  DirectionBank bank;
  EmaTracker tracker;
  TimeFeatureConfig time_cfg = TimeFeatureConfig::defaults();

  static L3rsContext learned(const Layout& layout, std::shared_ptr<const MetaParams> psi) {
    L3rsContext ctx;
    ctx.layout = layout;
    ctx.psi = psi;
    ctx.controller = std::make_shared<LearnedController>(layout, psi);
    ctx.bank = DirectionBank(layout.kinds, decode_hypers(layout, *psi));
    ctx.reset();
    return ctx;
  }

  // For hand-written controllers; hyperparameters at their defaults.
  static L3rsContext with_controller(const Layout& layout, std::shared_ptr<const Controller> controller,
                                     std::shared_ptr<const MetaParams> psi = nullptr) {
    L3rsContext ctx;
    ctx.layout = layout;
    ctx.psi = std::move(psi);
    ctx.controller = std::move(controller);
    ctx.bank = DirectionBank(layout.kinds);
    ctx.reset();
    return ctx;
  }

  std::size_t tracker_rows() const { return layout.variant == Variant::Global ? 1 : layout.num_components; }

  void reset() {
    bank.reset();
    tracker = EmaTracker(layout.gammas, tracker_rows());
  }
};

namespace detail {

inline double concat_norm(const ParamSet& p) {
  double s = 0.0;
  for (const auto& c : p.components) s += squared_norm(c.value.values());
  return std::sqrt(s);
}

}  // namespace detail

// One inner step: directions from the pre-update weights and gradient, EMA
// update with pre-update statistics, per-component controller decisions and
// finally params += update.
inline void l3rs_step(L3rsContext& ctx, ParamSet& params, const ParamSet& grads, double loss, std::int64_t k,
                      std::int64_t K, StepTrace* trace = nullptr) {
  const std::size_t L = params.size();
  if (L != ctx.layout.num_components) throw ShapeError("network component count does not match layout");
  if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss");

  const DirectionSet dirs = ctx.bank.step(grads, params);
  const std::size_t P = ctx.bank.size();
  const bool global = ctx.layout.variant == Variant::Global;
  const bool embed = ctx.layout.has_embeddings();
  if (embed && (!ctx.psi || ctx.psi->embeddings.rows() != L)) {
    throw ShapeError("embedding rows do not match component count");
  }

  std::vector<ComponentStats> stats;
  if (global) {
    stats.push_back({floored_log_norm(detail::concat_norm(params)), floored_log_norm(detail::concat_norm(grads))});
  } else {
    for (std::size_t c = 0; c < L; ++c) {
      stats.push_back({floored_log_norm(l2_norm(params[c])), floored_log_norm(l2_norm(grads[c]))});
    }
  }
  ctx.tracker.update(loss, stats);

  std::vector<std::vector<double>> frames;
  if (global) {
    std::vector<double> log_norms(P);
    for (std::size_t p = 0; p < P; ++p) {
      double s = 0.0;
      for (std::size_t c = 0; c < L; ++c) s += dirs.norms[c][p] * dirs.norms[c][p];
      log_norms[p] = floored_log_norm(std::sqrt(s));
    }
    frames.push_back(build_features(0, ctx.tracker, k, K, ctx.time_cfg, {}, log_norms).concat());
  } else {
    for (std::size_t c = 0; c < L; ++c) {
      std::span<const double> emb;
      if (embed) emb = std::span<const double>(&ctx.psi->embeddings.data[c * kEmbeddingDim], kEmbeddingDim);
      frames.push_back(build_features(c, ctx.tracker, k, K, ctx.time_cfg, emb, dirs.log_norms[c]).concat());
    }
  }

  const ControlInputs in{frames, params, grads, dirs, k, K, loss};
  std::vector<Mix> mixes = ctx.controller->decide(in);
  if (mixes.size() != L) throw ShapeError("controller returned the wrong number of decisions");

  std::vector<Tensor> updates;
  updates.reserve(L);
  for (std::size_t c = 0; c < L; ++c) {
    Tensor delta = compose_update(mixes[c].lambda, mixes[c].mu, dirs.dirs[c], ctx.layout.renormalize);
    if (!all_finite(delta.values())) throw DivergenceError("non-finite update in " + params.components[c].id.name);
    updates.push_back(std::move(delta));
  }
  for (std::size_t c = 0; c < L; ++c) axpy(1.0, updates[c], params[c]);
  if (trace) trace->mixes = std::move(mixes);
}

class L3rsOptimizer final : public InnerOptimizer {
 public:
  explicit L3rsOptimizer(L3rsContext ctx) : ctx_(std::move(ctx)) {}

  L3rsOptimizer(const Layout& layout, std::shared_ptr<const MetaParams> psi)
      : ctx_(L3rsContext::learned(layout, std::move(psi))) {}

  void start(const NetworkSpec& spec, const ParamSet& /*theta0*/, std::int64_t total_steps) override {
    if (spec.num_components() != ctx_.layout.num_components) {
      throw ShapeError("network has " + std::to_string(spec.num_components()) + " components, layout expects " +
                       std::to_string(ctx_.layout.num_components));
    }
    total_ = total_steps;
    ctx_.reset();
  }

  void step(ParamSet& params, const ParamSet& grads, double loss, std::int64_t k, StepTrace* trace) override {
    l3rs_step(ctx_, params, grads, loss, k, total_, trace);
  }

  double state_slots_per_parameter() const override {
    std::size_t s = 0;
    for (auto k : ctx_.layout.kinds) s += state_slots(k);
    return static_cast<double>(s);
  }

  std::size_t aux_scalars(std::size_t num_components) const override {
    const std::size_t rows = ctx_.layout.variant == Variant::Global ? 1 : num_components;
    return EmaTracker(ctx_.layout.gammas, rows).scalar_count();
  }

  const L3rsContext& context() const { return ctx_; }

 private:
  L3rsContext ctx_;
  std::int64_t total_ = 0;
};

inline OptimizerHandle l3rs_handle(std::string name, const Layout& layout, std::shared_ptr<const MetaParams> psi) {
  return {std::move(name), [layout, psi] { return std::make_unique<L3rsOptimizer>(layout, psi); }};
}

}  // namespace l3rs
