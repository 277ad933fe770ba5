#include "slamags/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace slamags {

void ScheduleConfig::validate() const {
  if (base_lr <= 0.0) throw std::invalid_argument("schedule: base_lr must be positive");
  if (final_lr < 0.0) throw std::invalid_argument("schedule: final_lr must be non-negative");
  if (warmup_epochs < 0) throw std::invalid_argument("schedule: warmup_epochs must be non-negative");
  if (warmup_epochs >= total_epochs)
    throw std::invalid_argument("schedule: warmup_epochs must be below total_epochs");
  if (steps_per_epoch <= 0)
    throw std::invalid_argument("schedule: steps_per_epoch must be positive");
}

double lr_at(int step, const ScheduleConfig& config) {
  config.validate();
  const int warmup = config.warmup_steps();
  const int total = config.total_steps();
  if (step < 0 || step > total) throw std::out_of_range("lr_at: step outside schedule");
  if (step < warmup)
    return config.base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return config.final_lr +
         0.5 * (config.base_lr - config.final_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd_momentum") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::SgdMomentum ? "sgd_momentum" : "adam";
}

OptimizerState OptimizerState::make(OptimizerKind kind, size_t n_params) {
  OptimizerState state;
  state.kind = kind;
  state.m.assign(n_params, 0.0);
  if (kind == OptimizerKind::Adam) state.v.assign(n_params, 0.0);
  return state;
}

std::vector<double> apply_update(const std::vector<double>& params,
                                 const std::vector<double>& grad,
                                 OptimizerState& state, double lr) {
  const size_t n = params.size();
  if (grad.size() != n || state.m.size() != n)
    throw std::invalid_argument("apply_update: gradient layout does not match parameters");
  if (state.kind == OptimizerKind::Adam && state.v.size() != n)
    throw std::invalid_argument("apply_update: adam second-moment buffer size mismatch");

  std::vector<double> out(n);
  state.step_count += 1;
  if (state.kind == OptimizerKind::SgdMomentum) {
    for (size_t i = 0; i < n; ++i) {
      state.m[i] = state.momentum * state.m[i] + grad[i];
      out[i] = params[i] - lr * state.m[i];
    }
    return out;
  }

  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  for (size_t i = 0; i < n; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    out[i] = params[i] - lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  return out;
}

}  // namespace slamags
