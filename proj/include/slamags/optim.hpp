#pragma once

#include <string>
#include <vector>

namespace slamags {

// Linear warmup followed by cosine annealing, advanced once per step.
struct ScheduleConfig {
  double base_lr = 1e-3;
  int warmup_epochs = 10;
  int total_epochs = 150;
  int steps_per_epoch = 1;
  double final_lr = 0.0;

  int warmup_steps() const { return warmup_epochs * steps_per_epoch; }
  int total_steps() const { return total_epochs * steps_per_epoch; }
  void validate() const;  // throws std::invalid_argument
};

// Learning rate for a given 0-based step. Valid for 0 <= step <= total_steps.
double lr_at(int step, const ScheduleConfig& config);

enum class OptimizerKind { SgdMomentum, Adam };

OptimizerKind optimizer_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

// Moment buffers over the flat parameter vector. `m` is the velocity for
// sgd_momentum and the first moment for adam; `v` is adam's second moment.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int step_count = 0;
  std::vector<double> m;
  std::vector<double> v;

  static OptimizerState make(OptimizerKind kind, size_t n_params);
};

// One optimizer step. Returns the updated parameters and advances `state`.
std::vector<double> apply_update(const std::vector<double>& params,
                                 const std::vector<double>& grad,
                                 OptimizerState& state, double lr);

}  // namespace slamags
