#include "slamags/surgery.hpp"

#include <cmath>
#include <stdexcept>

#include "slamags/autodiff.hpp"
#include "slamags/losses.hpp"

namespace slamags {

namespace {

constexpr double kEps = 1e-12;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

std::vector<double> flatten_grads(const GradMap& grads, const std::vector<Tensor>& leaves) {
  std::vector<double> flat;
  for (const Tensor& leaf : leaves) {
    const Mat& g = grads.at(leaf);
    flat.insert(flat.end(), g.data.begin(), g.data.end());
  }
  return flat;
}

}  // namespace

CombineStrategy strategy_from_string(const std::string& name) {
  if (name == "sum") return CombineStrategy::Sum;
  if (name == "pcgrad") return CombineStrategy::PcGrad;
  if (name == "pcgrad_rescaled") return CombineStrategy::PcGradRescaled;
  throw std::invalid_argument("unknown combine strategy '" + name + "'");
}

std::string to_string(CombineStrategy s) {
  switch (s) {
    case CombineStrategy::Sum: return "sum";
    case CombineStrategy::PcGrad: return "pcgrad";
    case CombineStrategy::PcGradRescaled: return "pcgrad_rescaled";
  }
  throw std::invalid_argument("invalid combine strategy value");
}

TaskGradients extract_task_gradients(const EncoderParams& params, const Mat& neg_views,
                                     const Mat& pos_views, double tau_sim,
                                     double tau_ntxent) {
  Tape tape;
  std::vector<Tensor> leaves;
  for (const Mat* m : params.tensors()) leaves.push_back(tape.leaf(*m, true));

  const int proj_dim = params.config.proj_dim;
  const Tensor neg_z = neg_views.rows > 0
                           ? encoder_forward(tape, params, neg_views, leaves).projected
                           : tape.constant(Mat(0, proj_dim));
  const Tensor pos_z = pos_views.rows > 0
                           ? encoder_forward(tape, params, pos_views, leaves).projected
                           : tape.constant(Mat(0, proj_dim));

  const PretrainBatch batch{neg_z, pos_z, tau_sim, tau_ntxent};
  const Tensor l_sim = similarity_loss(tape, batch);
  const Tensor l_simclr = ntxent_loss(tape, batch);

  TaskGradients out;
  out.l_sim = l_sim.item();
  out.l_simclr = l_simclr.item();
  out.g1 = flatten_grads(tape.backward(l_sim), leaves);
  out.g2 = flatten_grads(tape.backward(l_simclr), leaves);
  return out;
}

std::pair<std::vector<double>, bool> pcgrad_project(const std::vector<double>& g1,
                                                    const std::vector<double>& g2) {
  if (g1.size() != g2.size())
    throw std::invalid_argument("pcgrad_project: gradient length mismatch");
  const double d = dot(g1, g2);
  const size_t n = g1.size();
  if (d >= 0.0) {
    std::vector<double> sum(n);
    for (size_t i = 0; i < n; ++i) sum[i] = g1[i] + g2[i];
    return {std::move(sum), false};
  }
  // d < 0 implies both vectors are nonzero, so the divisions are safe.
  const double c1 = d / dot(g2, g2);
  const double c2 = d / dot(g1, g1);
  std::vector<double> g_pc(n);
  for (size_t i = 0; i < n; ++i) {
    const double p1 = g1[i] - c1 * g2[i];
    const double p2 = g2[i] - c2 * g1[i];
    g_pc[i] = p1 + p2;
  }
  return {std::move(g_pc), true};
}

std::vector<double> rescale(const std::vector<double>& g_pc, const std::vector<double>& g1,
                            const std::vector<double>& g2, SurgeryDiagnostics* diag) {
  if (g_pc.size() != g1.size() || g1.size() != g2.size())
    throw std::invalid_argument("rescale: gradient length mismatch");
  std::vector<double> sum(g1.size());
  for (size_t i = 0; i < g1.size(); ++i) sum[i] = g1[i] + g2[i];
  const double gsum_norm = norm(sum);
  const double gpc_norm = norm(g_pc);

  if (diag) {
    diag->gsum_norm = gsum_norm;
    diag->gpc_norm = gpc_norm;
  }
  if (gpc_norm < gsum_norm && gpc_norm > kEps) {
    const double factor = gsum_norm / gpc_norm;
    if (diag) diag->rescale_factor = factor;
    std::vector<double> out(g_pc.size());
    for (size_t i = 0; i < g_pc.size(); ++i) out[i] = g_pc[i] * factor;
    return out;
  }
  if (gpc_norm <= kEps && gsum_norm > kEps && diag) diag->collapsed = true;
  if (diag) diag->rescale_factor = 1.0;
  return g_pc;
}

std::vector<double> combine(const std::vector<double>& g1, const std::vector<double>& g2,
                            CombineStrategy strategy, SurgeryDiagnostics* diag) {
  auto [g_pc, conflicted] = pcgrad_project(g1, g2);
  if (diag) {
    *diag = SurgeryDiagnostics{};
    diag->conflicted = conflicted;
    diag->g1_norm = norm(g1);
    diag->g2_norm = norm(g2);
  }

  if (strategy == CombineStrategy::Sum) {
    std::vector<double> sum(g1.size());
    for (size_t i = 0; i < g1.size(); ++i) sum[i] = g1[i] + g2[i];
    if (diag) {
      diag->gsum_norm = norm(sum);
      diag->gpc_norm = norm(g_pc);
    }
    return sum;
  }
  if (strategy == CombineStrategy::PcGrad) {
    if (diag) {
      std::vector<double> sum(g1.size());
      for (size_t i = 0; i < g1.size(); ++i) sum[i] = g1[i] + g2[i];
      diag->gsum_norm = norm(sum);
      diag->gpc_norm = norm(g_pc);
    }
    return g_pc;
  }
  return rescale(g_pc, g1, g2, diag);
}

}  // namespace slamags
