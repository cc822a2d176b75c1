#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "l3rs/controller.hpp"
#include "l3rs/nn.hpp"

namespace l3rs {

// Per-step record of what an optimizer did to every component.
struct StepTrace {
  std::vector<Mix> mixes;  // one per component; mu empty for hand-designed optimizers
};

// An inner-loop optimizer. One instance serves one task evaluation.
class InnerOptimizer {
 public:
  virtual ~InnerOptimizer() = default;

  // Resets all state for a fresh run of total_steps steps.
  virtual void start(const NetworkSpec& spec, const ParamSet& theta0, std::int64_t total_steps) = 0;

  // Applies step k (1-based) in place.
  virtual void step(ParamSet& params, const ParamSet& grads, double loss, std::int64_t k,
                    StepTrace* trace) = 0;

  // Persistent per-parameter state tensors divided by parameter count.
  virtual double state_slots_per_parameter() const = 0;

  // Scalars kept outside the per-parameter state.
  virtual std::size_t aux_scalars(std::size_t /*num_components*/) const { return 0; }
};

using OptimizerFactory = std::function<std::unique_ptr<InnerOptimizer>()>;

struct OptimizerHandle {
  std::string name;
  OptimizerFactory make;
};

}  // namespace l3rs
