#pragma once

#include <vector>

#include "slamags/autodiff.hpp"

namespace slamags {

// One pretraining batch after embedding: slide-negative views and
// slide-positive views (rows 2k, 2k+1 are the two views of patch k).
// Either block may have zero rows; the losses degrade to 0 gracefully.
// tau_sim and tau_ntxent default to one shared temperature but can be
// overridden independently.
struct PretrainBatch {
  Tensor neg_views;
  Tensor pos_views;
  double tau_sim = 0.5;
  double tau_ntxent = 0.5;
};

// Mean pairwise raw-dot-product attraction over all ordered pairs of
// negative views, negated: -(1/n) * sum_{i != j} (z_i . z_j) / tau where n is
// the number of negative views. Fewer than two views -> exactly 0.
Tensor similarity_loss(Tape& tape, const PretrainBatch& batch);

// Normalized-temperature cross-entropy over the positive views: for each
// anchor view i with partner j, -log( exp(cos(z_i,z_j)/tau) /
// sum_{k != i} exp(cos(z_i,z_k)/tau) ), averaged over all anchors.
// Cosine similarity is computed internally (rows are re-normalized).
// Stabilized by subtracting a detached per-anchor max over k != i, which
// also makes the single-patch batch return exactly 0. Zero rows -> 0.
Tensor ntxent_loss(Tape& tape, const PretrainBatch& batch);

// Mean over the batch of -log softmax(logits)[label]; logits are (B x 2),
// labels in {0, 1}. Computed via a detached-max log-sum-exp.
Tensor cross_entropy_loss(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

struct CombinedLoss {
  Tensor total;
  Tensor l_sim;
  Tensor l_simclr;
};

// Unweighted sum of the two contrastive objectives.
CombinedLoss combined_loss(Tape& tape, const PretrainBatch& batch);

}  // namespace slamags
