#pragma once

#include <string>
#include <utility>
#include <vector>

#include "slamags/encoder.hpp"
#include "slamags/mat.hpp"

namespace slamags {

// Gradients of the two pretraining objectives w.r.t. all shared parameters,
// flattened in EncoderParams::tensors() order (the project-wide layout).
struct TaskGradients {
  std::vector<double> g1;  // similarity objective
  std::vector<double> g2;  // view-contrastive objective
  double l_sim = 0.0;
  double l_simclr = 0.0;
};

enum class CombineStrategy { Sum, PcGrad, PcGradRescaled };

CombineStrategy strategy_from_string(const std::string& name);
std::string to_string(CombineStrategy s);

// Per-step diagnostics, logged by the training driver.
struct SurgeryDiagnostics {
  bool conflicted = false;
  bool collapsed = false;  // projected gradient vanished while the sum did not
  double g1_norm = 0.0;
  double g2_norm = 0.0;
  double gsum_norm = 0.0;
  double gpc_norm = 0.0;
  double rescale_factor = 1.0;
};

// Two separate backward passes over one shared forward graph: g1 from the
// similarity loss on the negative views, g2 from the view-contrastive loss
// on the positive views. Either block may be empty (its gradient is zero).
TaskGradients extract_task_gradients(const EncoderParams& params, const Mat& neg_views,
                                     const Mat& pos_views, double tau_sim,
                                     double tau_ntxent);

// Symmetric two-task conflict projection: when g1.g2 < 0, each gradient is
// projected onto the normal plane of the ORIGINAL other gradient;
// otherwise the plain sum is returned. Returns (g_pc, conflicted).
std::pair<std::vector<double>, bool> pcgrad_project(const std::vector<double>& g1,
                                                    const std::vector<double>& g2);

// Restore the magnitude of the projected gradient to that of g1+g2 when the
// projection shrank it; a vanished projection is returned unchanged and
// flagged as collapsed in the diagnostics.
std::vector<double> rescale(const std::vector<double>& g_pc, const std::vector<double>& g1,
                            const std::vector<double>& g2,
                            SurgeryDiagnostics* diag = nullptr);

// Full strategy dispatch; always fills the diagnostics (conflict detection
// runs even for Sum so run logs expose conflict frequency).
std::vector<double> combine(const std::vector<double>& g1, const std::vector<double>& g2,
                            CombineStrategy strategy, SurgeryDiagnostics* diag = nullptr);

}  // namespace slamags
