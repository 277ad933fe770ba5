#include "slamags/losses.hpp"

#include <algorithm>
#include <stdexcept>

#include "slamags/mat.hpp"

namespace slamags {

namespace {

Mat offdiag_mask(int n) {
  Mat m = Mat::full(n, n, 1.0);
  for (int i = 0; i < n; ++i) m.at(i, i) = 0.0;
  return m;
}

}  // namespace

Tensor similarity_loss(Tape& tape, const PretrainBatch& batch) {
  if (batch.tau_sim <= 0) throw std::invalid_argument("similarity_loss: tau must be > 0");
  const Tensor& z = batch.neg_views;
  const int n = z.rows();
  if (n < 2) return tape.scalar(0.0);

  const Tensor sims = tape.matmul(z, tape.transpose(z));
  const Tensor offdiag = tape.mul(sims, tape.constant(offdiag_mask(n)));
  return tape.scalar_mul(tape.sum_all(offdiag), -1.0 / (n * batch.tau_sim));
}

Tensor ntxent_loss(Tape& tape, const PretrainBatch& batch) {
  if (batch.tau_ntxent <= 0) throw std::invalid_argument("ntxent_loss: tau must be > 0");
  const Tensor& views = batch.pos_views;
  const int v = views.rows();
  if (v == 0) return tape.scalar(0.0);
  if (v % 2 != 0)
    throw std::invalid_argument("ntxent_loss: positive views must come in pairs");

  const Tensor z = tape.row_l2_normalize(views);
  const Tensor sims = tape.scalar_mul(tape.matmul(z, tape.transpose(z)), 1.0 / batch.tau_ntxent);

  // Detached per-anchor max over k != i: stabilizes the log-sum-exp without
  // entering the gradient, and keeps exp off the (excluded) diagonal, whose
  // entries would dominate at small tau.
  const Mat& s = sims.value();
  Mat row_max(v, 1);
  for (int i = 0; i < v; ++i) {
    double best = -1.0 / 0.0;
    for (int k = 0; k < v; ++k)
      if (k != i && s.at(i, k) > best) best = s.at(i, k);
    row_max.at(i, 0) = best;
  }
  const Tensor max_const = tape.constant(row_max);

  const Tensor mask = tape.constant(offdiag_mask(v));
  const Tensor shifted = tape.sub_colvec(sims, max_const);
  // Zero the diagonal both before exp (so the excluded self-terms cannot
  // overflow) and after (so their exp(0)=1 does not enter the sum).
  const Tensor exp_offdiag = tape.mul(tape.exp(tape.mul(shifted, mask)), mask);
  const Tensor lse =
      tape.add(tape.log(tape.sum_axis(exp_offdiag, Axis::Cols)), max_const);

  Mat partner_mask(v, v);
  for (int i = 0; i < v; ++i) partner_mask.at(i, i ^ 1) = 1.0;
  const Tensor pair_sims =
      tape.sum_axis(tape.mul(sims, tape.constant(partner_mask)), Axis::Cols);

  return tape.scalar_mul(tape.sum_all(tape.sub(pair_sims, lse)), -1.0 / v);
}

Tensor cross_entropy_loss(Tape& tape, const Tensor& logits,
                          const std::vector<int>& labels) {
  const int b = logits.rows();
  if (b == 0) throw std::invalid_argument("cross_entropy_loss: empty batch");
  if (logits.cols() != 2)
    throw std::invalid_argument("cross_entropy_loss: logits must be (B x 2)");
  if (static_cast<int>(labels.size()) != b)
    throw std::invalid_argument("cross_entropy_loss: labels/logits size mismatch");

  Mat onehot(b, 2);
  for (int i = 0; i < b; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y != 0 && y != 1)
      throw std::invalid_argument("cross_entropy_loss: labels must be 0 or 1");
    onehot.at(i, y) = 1.0;
  }

  const Mat& lv = logits.value();
  Mat row_max(b, 1);
  for (int i = 0; i < b; ++i) row_max.at(i, 0) = std::max(lv.at(i, 0), lv.at(i, 1));
  const Tensor max_const = tape.constant(row_max);

  const Tensor shifted = tape.sub_colvec(logits, max_const);
  const Tensor lse =
      tape.add(tape.log(tape.sum_axis(tape.exp(shifted), Axis::Cols)), max_const);
  const Tensor picked =
      tape.sum_axis(tape.mul(logits, tape.constant(onehot)), Axis::Cols);
  return tape.mean_all(tape.sub(lse, picked));
}

CombinedLoss combined_loss(Tape& tape, const PretrainBatch& batch) {
  const Tensor l_sim = similarity_loss(tape, batch);
  const Tensor l_simclr = ntxent_loss(tape, batch);
  return CombinedLoss{tape.add(l_sim, l_simclr), l_sim, l_simclr};
}

}  // namespace slamags
