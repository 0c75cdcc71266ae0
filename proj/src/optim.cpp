#include "cvtslr/optim.hpp"

#include <cmath>
#include <string>

#include "cvtslr/error.hpp"

namespace cvtslr {

void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    const OptimizerConfig& cfg) {
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorCode::kShapeMismatch, "optimizer: " + std::to_string(params.size()) + " params, " +
                                        std::to_string(grads.size()) + " grads, " + std::to_string(state.m.size()) +
                                        " state entries");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const bool decoupled = cfg.kind == OptimizerKind::kAdamW && cfg.weight_decay != 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (decoupled) params[i] -= cfg.learning_rate * cfg.weight_decay * params[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

Optimizer::Optimizer(std::vector<Tensor> params, OptimizerConfig cfg)
    : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0)) fail(ErrorCode::kInvalidConfig, "learning rate must be positive");
  if (cfg_.weight_decay < 0.0) fail(ErrorCode::kInvalidConfig, "weight decay must be non-negative");
}

void Optimizer::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (p.has_grad()) {
      optimizer_step(p.mutable_values(), p.grad(), states_[k], cfg_);
    } else {
      const std::vector<double> zeros(p.numel(), 0.0);
      optimizer_step(p.mutable_values(), zeros, states_[k], cfg_);
    }
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace cvtslr
