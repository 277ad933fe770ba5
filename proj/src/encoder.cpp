#include "slamags/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "slamags/flat.hpp"
#include "slamags/serialize.hpp"

namespace slamags {

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh or relu)");
}

std::string to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}

void EncoderConfig::validate() const {
  if (input_dim <= 0 || hidden_dim <= 0 || feat_dim <= 0 || proj_dim <= 0)
    throw std::invalid_argument("encoder dims must be positive");
}

void AugmentConfig::validate() const {
  if (jitter_sigma < 0) throw std::invalid_argument("jitter_sigma must be >= 0");
  if (!(scale_lo > 0) || scale_lo > scale_hi)
    throw std::invalid_argument("scale range must satisfy 0 < lo <= hi");
  if (dropout_p < 0 || dropout_p >= 1)
    throw std::invalid_argument("dropout_p must be in [0, 1)");
}

namespace {

Mat glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  Mat w(fan_in, fan_out);
  for (double& v : w.data) v = rng.uniform(-a, a);
  return w;
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  EncoderParams p;
  p.config = config;
  p.w1 = glorot_uniform(config.input_dim, config.hidden_dim, rng);
  p.b1 = Mat::zeros(1, config.hidden_dim);
  p.w2 = glorot_uniform(config.hidden_dim, config.feat_dim, rng);
  p.b2 = Mat::zeros(1, config.feat_dim);
  p.wp = glorot_uniform(config.feat_dim, config.proj_dim, rng);
  p.bp = Mat::zeros(1, config.proj_dim);
  return p;
}

std::pair<std::vector<double>, std::vector<double>> augment(
    const std::vector<double>& features, const AugmentConfig& config, Rng& rng) {
  auto one_view = [&]() {
    const double scale = rng.uniform(config.scale_lo, config.scale_hi);
    std::vector<double> v(features.size());
    for (size_t i = 0; i < features.size(); ++i)
      v[i] = scale * features[i] + config.jitter_sigma * rng.normal();
    for (double& x : v)
      if (rng.uniform() < config.dropout_p) x = 0.0;
    return v;
  };
  auto a = one_view();
  auto b = one_view();
  return {std::move(a), std::move(b)};
}

EncoderForward encoder_forward(Tape& tape, const EncoderParams& params, const Mat& batch,
                               bool requires_grad) {
  std::vector<Tensor> leaves;
  for (const Mat* m : params.tensors()) leaves.push_back(tape.leaf(*m, requires_grad));
  return encoder_forward(tape, params, batch, leaves);
}

EncoderForward encoder_forward(Tape& tape, const EncoderParams& params, const Mat& batch,
                               const std::vector<Tensor>& leaves) {
  if (batch.cols != params.config.input_dim)
    throw std::invalid_argument("encoder_forward: batch feature dim " +
                                std::to_string(batch.cols) + " != input_dim " +
                                std::to_string(params.config.input_dim));
  if (leaves.size() != 6)
    throw std::invalid_argument("encoder_forward: expected 6 parameter leaves");

  const Tensor x = tape.constant(batch);
  auto act = [&](const Tensor& t) {
    return params.config.activation == Activation::Tanh ? tape.tanh(t) : tape.relu(t);
  };
  const Tensor h1 = act(tape.add_rowvec(tape.matmul(x, leaves[0]), leaves[1]));
  const Tensor backbone = act(tape.add_rowvec(tape.matmul(h1, leaves[2]), leaves[3]));
  Tensor z = tape.add_rowvec(tape.matmul(backbone, leaves[4]), leaves[5]);
  if (params.config.normalize_embeddings) z = tape.row_l2_normalize(z);
  return EncoderForward{std::move(leaves), backbone, z};
}

Mat embed_backbone(const EncoderParams& params, const Mat& batch) {
  Tape tape;
  return encoder_forward(tape, params, batch, false).backbone.value();
}

Mat embed_projected(const EncoderParams& params, const Mat& batch) {
  Tape tape;
  return encoder_forward(tape, params, batch, false).projected.value();
}

void save_encoder(const std::string& path, const EncoderParams& params) {
  SlagFile file;
  file.kind = kKindEncoder;
  file.meta = {static_cast<uint32_t>(params.config.input_dim),
               static_cast<uint32_t>(params.config.hidden_dim),
               static_cast<uint32_t>(params.config.feat_dim),
               static_cast<uint32_t>(params.config.proj_dim),
               params.config.activation == Activation::Relu ? 1u : 0u,
               params.config.normalize_embeddings ? 1u : 0u};
  file.payload = flatten(params.tensors());
  save_slag(path, file);
}

EncoderParams load_encoder(const std::string& path) {
  const SlagFile file = load_slag(path);
  if (file.kind != kKindEncoder)
    throw std::runtime_error(path + ": checkpoint kind is not an encoder");
  if (file.meta.size() != 6)
    throw std::runtime_error(path + ": unexpected encoder metadata length");

  EncoderConfig config;
  config.input_dim = static_cast<int>(file.meta[0]);
  config.hidden_dim = static_cast<int>(file.meta[1]);
  config.feat_dim = static_cast<int>(file.meta[2]);
  config.proj_dim = static_cast<int>(file.meta[3]);
  config.activation = file.meta[4] ? Activation::Relu : Activation::Tanh;
  config.normalize_embeddings = file.meta[5] != 0;
  config.validate();

  EncoderParams p;
  p.config = config;
  p.w1 = Mat(config.input_dim, config.hidden_dim);
  p.b1 = Mat(1, config.hidden_dim);
  p.w2 = Mat(config.hidden_dim, config.feat_dim);
  p.b2 = Mat(1, config.feat_dim);
  p.wp = Mat(config.feat_dim, config.proj_dim);
  p.bp = Mat(1, config.proj_dim);
  if (file.payload.size() != total_size(std::as_const(p).tensors()))
    throw std::runtime_error(path + ": payload size does not match encoder shape");
  unflatten(file.payload, p.tensors());
  for (const Mat* m : std::as_const(p).tensors())
    if (!m->all_finite()) throw std::runtime_error(path + ": non-finite parameter values");
  return p;
}

}  // namespace slamags
