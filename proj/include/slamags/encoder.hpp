#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slamags/autodiff.hpp"
#include "slamags/mat.hpp"
#include "slamags/rng.hpp"

namespace slamags {

enum class Activation { Tanh, Relu };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct EncoderConfig {
  int input_dim = 32;
  int hidden_dim = 64;
  int feat_dim = 32;
  int proj_dim = 16;
  Activation activation = Activation::Tanh;
  bool normalize_embeddings = true;

  void validate() const;  // throws std::invalid_argument
};

// Feature-space view augmentation: multiplicative scale, additive Gaussian
// jitter, per-coordinate dropout.
struct AugmentConfig {
  double jitter_sigma = 0.3;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double dropout_p = 0.05;

  void validate() const;  // throws std::invalid_argument
};

// Two-layer MLP backbone plus a linear projection head. Weights multiply on
// the right: rows are batch samples.
struct EncoderParams {
  EncoderConfig config;
  Mat w1, b1;  // input -> hidden
  Mat w2, b2;  // hidden -> feat
  Mat wp, bp;  // feat -> proj

  std::vector<const Mat*> tensors() const { return {&w1, &b1, &w2, &b2, &wp, &bp}; }
  std::vector<Mat*> tensors() { return {&w1, &b1, &w2, &b2, &wp, &bp}; }
};

EncoderParams init_encoder(const EncoderConfig& config, uint64_t seed);

// Two independent stochastic views of one patch's features.
std::pair<std::vector<double>, std::vector<double>> augment(
    const std::vector<double>& features, const AugmentConfig& config, Rng& rng);

// Tape-recorded forward pass. `leaves` holds the parameter tensors in the
// same order as EncoderParams::tensors(), so backward results can be
// flattened against that layout.
struct EncoderForward {
  std::vector<Tensor> leaves;
  Tensor backbone;   // (B, feat_dim)
  Tensor projected;  // (B, proj_dim); unit rows when normalization is on
};

EncoderForward encoder_forward(Tape& tape, const EncoderParams& params, const Mat& batch,
                               bool requires_grad = true);

// Variant reusing already-recorded parameter leaves, so several forward
// passes on one tape share a single gradient slot per parameter.
EncoderForward encoder_forward(Tape& tape, const EncoderParams& params, const Mat& batch,
                               const std::vector<Tensor>& leaves);

// Gradient-free inference helpers (fresh tape inside).
Mat embed_backbone(const EncoderParams& params, const Mat& batch);
Mat embed_projected(const EncoderParams& params, const Mat& batch);

void save_encoder(const std::string& path, const EncoderParams& params);
EncoderParams load_encoder(const std::string& path);

}  // namespace slamags
