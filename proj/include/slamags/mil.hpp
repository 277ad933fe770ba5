#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slamags/autodiff.hpp"
#include "slamags/data.hpp"
#include "slamags/encoder.hpp"
#include "slamags/mat.hpp"
#include "slamags/optim.hpp"

namespace slamags {

struct MilConfig {
  int feat_dim = 32;  // must match the embedding fed to the aggregator
  int attn_dim = 32;
  int epochs = 50;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  bool uses_projection = false;  // false: backbone features, true: projected

  void validate() const;  // throws std::invalid_argument
};

// Gated-attention aggregator: a = softmax(w' (tanh(hV) .* sigmoid(hU))),
// bag embedding = sum_k a_k h_k, followed by a 2-way linear classifier.
struct AggregatorParams {
  MilConfig config;
  Mat v;   // feat_dim x attn_dim
  Mat u;   // feat_dim x attn_dim
  Mat w;   // attn_dim x 1
  Mat wc;  // feat_dim x 2
  Mat bc;  // 1 x 2

  std::vector<const Mat*> tensors() const { return {&v, &u, &w, &wc, &bc}; }
  std::vector<Mat*> tensors() { return {&v, &u, &w, &wc, &bc}; }
};

AggregatorParams init_aggregator(const MilConfig& config, uint64_t seed);

struct BagPrediction {
  std::vector<double> bag_logits;  // 2 entries
  std::vector<double> attention;   // one entry per instance, sums to 1
  int predicted_label = 0;
};

// Tape-recorded forward pass over one bag's instance features (N x feat_dim).
struct MilGraph {
  std::vector<Tensor> leaves;  // parameter leaves, AggregatorParams::tensors() order
  Tensor attention;            // 1 x N
  Tensor logits;               // 1 x 2
};

MilGraph mil_graph(Tape& tape, const AggregatorParams& params, const Mat& features);

BagPrediction mil_forward(const AggregatorParams& params, const Mat& features);

// Instance indices sorted by attention descending, ties by ascending index.
std::vector<int> rank_instances(const BagPrediction& prediction);

// The embedding the aggregator sees for one bag, from a frozen encoder.
Mat mil_inputs(const EncoderParams& encoder, const Bag& bag, const MilConfig& config);

// Trains on precomputed per-bag feature matrices (one CE step per bag,
// cosine schedule without warmup). Deterministic per seed.
AggregatorParams train_mil_on_features(const std::vector<Mat>& bag_features,
                                       const std::vector<int>& bag_labels,
                                       const MilConfig& config, uint64_t seed);

// Embeds bags with the frozen encoder, then trains the aggregator.
AggregatorParams train_mil(const std::vector<Bag>& train_bags,
                           const EncoderParams& encoder, const MilConfig& config,
                           uint64_t seed);

void save_aggregator(const std::string& path, const AggregatorParams& params);
AggregatorParams load_aggregator(const std::string& path);

}  // namespace slamags
