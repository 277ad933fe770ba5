#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slamags/data.hpp"
#include "slamags/encoder.hpp"
#include "slamags/optim.hpp"
#include "slamags/surgery.hpp"

namespace slamags {

enum class Method {
  WeaklySupervised,   // cross-entropy on propagated slide labels
  SimClr,             // view-contrastive over all patches, labels unused
  WeakSupCon,         // both task losses, summed gradients
  SlamAgsNoRescale,   // both task losses, conflict projection
  SlamAgs,            // both task losses, projection + norm rescaling
};

Method method_from_string(const std::string& name);
std::string to_string(Method method);
const std::vector<Method>& all_methods();

struct PretrainConfig {
  EncoderConfig encoder;
  AugmentConfig augment;
  double tau_sim = 0.5;
  double tau_ntxent = 0.5;
  int epochs = 150;
  int batch_size = 64;
  double base_lr = 1e-3;
  int warmup_epochs = 10;
  double final_lr = 0.0;
  OptimizerKind optimizer = OptimizerKind::Adam;

  void validate() const;  // throws std::invalid_argument
};

// One optimizer step's telemetry. Single-loss methods put their loss in the
// matching task column (task1 = label loss, task2 = view-contrastive loss),
// leave the other at 0, and report the applied gradient norm as gsum_norm.
struct StepRecord {
  int step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_task1 = 0.0;
  double loss_task2 = 0.0;
  bool conflict = false;
  double g1_norm = 0.0;
  double g2_norm = 0.0;
  double gsum_norm = 0.0;
  double gpc_norm = 0.0;
  double rescale_factor = 1.0;
};

struct PretrainRunLog {
  std::vector<StepRecord> steps;
  std::string checkpoint_path;  // filled by the caller after saving
};

struct PretrainResult {
  EncoderParams params;
  PretrainRunLog log;
};

// Trains the encoder with the given method. Deterministic per (method,
// config, seed): parameter init, batch sampling, and augmentation each use a
// fixed stream derived from `seed`. Per step, patches are augmented one by
// one in batch order (positive half first for label-aware methods).
PretrainResult pretrain(Method method, const std::vector<Bag>& train_bags,
                        const PretrainConfig& config, uint64_t seed);

// CSV: step,lr,loss_total,loss_task1,loss_task2,conflict,g1_norm,g2_norm,
//      gsum_norm,gpc_norm,rescale_factor
void save_run_log_csv(const std::string& path, const PretrainRunLog& log);
PretrainRunLog load_run_log_csv(const std::string& path);

}  // namespace slamags
