#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cvtslr/tensor.hpp"

namespace cvtslr {

enum class OptimizerKind { kAdam, kAdamW };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-4;
  double weight_decay = 0.0;  // decoupled; only applied by AdamW
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam/AdamW update of `params` in place. An empty state
// is sized on first use.
void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    const OptimizerConfig& cfg);

class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, OptimizerConfig cfg);

  void step();
  void zero_grad();
  const OptimizerConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  OptimizerConfig cfg_;
};

}  // namespace cvtslr
