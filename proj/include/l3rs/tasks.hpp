#pragma once

// Synthetic fine-tuning task distributions built from Gaussian class blobs
// partitioned into pretrain / meta-train / meta-test class splits.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "l3rs/error.hpp"
#include "l3rs/nn.hpp"
#include "l3rs/optdir.hpp"
#include "l3rs/rng.hpp"

namespace l3rs {

struct BlobGenerator {
  std::size_t input_dim = 16;
  std::size_t total_classes = 16;
  double blob_std = 0.5;
  std::uint64_t seed = 1;

  bool operator==(const BlobGenerator&) const = default;
};

enum class Split { Pretrain, MetaTrain, MetaTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Pretrain: return "pretrain";
    case Split::MetaTrain: return "metatrain";
    case Split::MetaTest: return "metatest";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  for (auto v : {Split::Pretrain, Split::MetaTrain, Split::MetaTest}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

struct TaskDistributionSpec {
  BlobGenerator generator;
  std::size_t pretrain_classes = 8;
  std::size_t metatrain_classes = 4;
  std::size_t metatest_classes = 4;
  std::size_t classes_per_task = 4;
  std::size_t train_batch_size = 32;
  std::size_t eval_batch_size = 256;
  std::int64_t k_min = 5;
  std::int64_t k_max = 25;

  std::size_t split_size(Split s) const {
    switch (s) {
      case Split::Pretrain: return pretrain_classes;
      case Split::MetaTrain: return metatrain_classes;
      case Split::MetaTest: return metatest_classes;
    }
    return 0;
  }

  // Classes are laid out consecutively: pretrain, meta-train, meta-test.
  std::vector<std::size_t> split_classes(Split s) const {
    std::size_t first = 0;
    if (s != Split::Pretrain) first += pretrain_classes;
    if (s == Split::MetaTest) first += metatrain_classes;
    std::vector<std::size_t> out(split_size(s));
    std::iota(out.begin(), out.end(), first);
    return out;
  }

  void validate() const {
    if (generator.input_dim == 0) throw ConfigError("generator input_dim must be >= 1");
    if (!(generator.blob_std >= 0.0)) throw ConfigError("blob_std must be >= 0");
    if (pretrain_classes + metatrain_classes + metatest_classes > generator.total_classes) {
      throw ConfigError("class splits exceed total_classes");
    }
    if (classes_per_task < 1) throw ConfigError("classes_per_task must be >= 1");
    if (train_batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch sizes must be >= 1");
    if (k_min < 1 || k_max < k_min) throw ConfigError("K range must satisfy 1 <= K_min <= K_max");
  }

  bool operator==(const TaskDistributionSpec&) const = default;
};

// Class means drawn uniformly in [-1, 1]^d from the generator seed.
class BlobSampler {
 public:
  explicit BlobSampler(const BlobGenerator& g) : gen_(g), means_(g.total_classes * g.input_dim) {
    Rng rng(derive_seed({tag(Stream::Generator), g.seed}));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& m : means_) m = u(rng);
  }

  const BlobGenerator& generator() const { return gen_; }

  std::span<const double> mean(std::size_t cls) const {
    return std::span<const double>(means_).subspan(cls * gen_.input_dim, gen_.input_dim);
  }

  // n samples with labels drawn uniformly from classes; label = position in
  // `classes`.
  Batch sample(const std::vector<std::size_t>& classes, std::size_t n, Rng& rng) const {
    Batch b{Tensor({n, gen_.input_dim}), std::vector<std::size_t>(n)};
    std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
    std::normal_distribution<double> noise(0.0, gen_.blob_std);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t label = pick(rng);
      b.y[r] = label;
      const auto mu = mean(classes[label]);
      for (std::size_t j = 0; j < gen_.input_dim; ++j) b.x.at(r, j) = mu[j] + noise(rng);
    }
    return b;
  }

 private:
  BlobGenerator gen_;
  std::vector<double> means_;
};

struct Task {
  NetworkSpec spec;
  ParamSet theta0;
  std::vector<Batch> train_batches;
  Batch eval_batch;
  std::int64_t K = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> classes;
};

// Where tasks come from: a distribution, a split, a network body and the
// initial weights (a pretrained checkpoint, or random init when null).
struct TaskSource {
  TaskDistributionSpec dist;
  Split split = Split::MetaTrain;
  std::vector<std::size_t> hidden{32};
  std::shared_ptr<const ParamSet> checkpoint;

  NetworkSpec task_network() const { return {dist.generator.input_dim, hidden, dist.classes_per_task}; }
};

// Copies the body from the checkpoint and re-initializes the head to the
// new class count.
inline ParamSet transplant_body(const ParamSet& checkpoint, const NetworkSpec& spec, Rng& head_rng) {
  ParamSet p = zero_params(spec);
  const std::size_t last = spec.num_layers() - 1;
  if (checkpoint.size() != p.size()) throw ShapeError("checkpoint depth does not match task network");
  for (std::size_t c = 0; c < 2 * last; ++c) {
    if (!checkpoint[c].same_shape(p[c])) throw ShapeError("checkpoint body shape does not match task network");
    p[c] = checkpoint[c];
  }
  init_layer(spec, last, head_rng, p);
  return p;
}

inline Task sample_task(const TaskSource& src, std::uint64_t seed, std::optional<std::int64_t> K_override = {}) {
  const auto& dist = src.dist;
  dist.validate();
  auto pool = dist.split_classes(src.split);
  if (dist.classes_per_task > pool.size()) {
    throw ConfigError("split " + std::string(to_string(src.split)) + " has " + std::to_string(pool.size()) +
                      " classes, task needs " + std::to_string(dist.classes_per_task));
  }
  Task t;
  t.seed = seed;
  t.spec = src.task_network();
  Rng rng(derive_seed({tag(Stream::Task), seed}));
  std::shuffle(pool.begin(), pool.end(), rng);
  t.classes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(dist.classes_per_task));
  std::uniform_int_distribution<std::int64_t> kdist(dist.k_min, dist.k_max);
  const std::int64_t sampled_K = kdist(rng);
  t.K = K_override ? *K_override : sampled_K;
  if (t.K < 0) throw ConfigError("negative step count");

  Rng head_rng(derive_seed({tag(Stream::HeadInit), seed}));
  t.theta0 = src.checkpoint ? transplant_body(*src.checkpoint, t.spec, head_rng)
                            : init_params(t.spec, derive_seed({tag(Stream::Init), seed}));

  // Evaluation batch first so it does not depend on K.
  const BlobSampler sampler(dist.generator);
  Rng data_rng(derive_seed({tag(Stream::Batches), seed}));
  t.eval_batch = sampler.sample(t.classes, dist.eval_batch_size, data_rng);
  for (std::int64_t i = 0; i < t.K; ++i) {
    t.train_batches.push_back(sampler.sample(t.classes, dist.train_batch_size, data_rng));
  }
  return t;
}

struct PretrainResult {
  ParamSet params;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
};

inline NetworkSpec pretrain_network(const TaskDistributionSpec& dist, const std::vector<std::size_t>& hidden) {
  return {dist.generator.input_dim, hidden, dist.pretrain_classes};
}

// Trains a fresh model on the whole pretrain split with constant-lr Adam
// (1e-3), then measures it on a held-out batch from the same split.
inline PretrainResult pretrain_checkpoint(const TaskDistributionSpec& dist, const std::vector<std::size_t>& hidden,
                                          std::int64_t steps, std::uint64_t seed, double lr = 1e-3) {
  dist.validate();
  if (dist.pretrain_classes == 0) throw ConfigError("pretrain split is empty");
  const NetworkSpec spec = pretrain_network(dist, hidden);
  const auto classes = dist.split_classes(Split::Pretrain);
  const BlobSampler sampler(dist.generator);
  PretrainResult out{init_params(spec, derive_seed({tag(Stream::Pretrain), seed, 0})), 0.0, 0.0};
  Rng data_rng(derive_seed({tag(Stream::Pretrain), seed, 1}));
  const HyperParams hp = default_hyper(OptimizerKind::Adam);
  std::vector<MomentState> state(spec.num_components());
  for (std::int64_t k = 1; k <= steps; ++k) {
    const Batch b = sampler.sample(classes, dist.train_batch_size, data_rng);
    const auto lg = loss_and_grad(spec, out.params, b);
    for (std::size_t c = 0; c < out.params.size(); ++c) {
      axpy(lr, dir_adam(state[c], lg.grads[c], hp, k), out.params[c]);
    }
  }
  Rng eval_rng(derive_seed({tag(Stream::Pretrain), seed, 2}));
  const Batch held_out = sampler.sample(classes, dist.eval_batch_size, eval_rng);
  const Tensor logits = forward(spec, out.params, held_out.x);
  out.eval_loss = cross_entropy(logits, held_out.y);
  out.eval_accuracy = accuracy(logits, held_out.y);
  return out;
}

}  // namespace l3rs
