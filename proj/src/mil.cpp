#include "slamags/mil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "slamags/flat.hpp"
#include "slamags/losses.hpp"
#include "slamags/serialize.hpp"

namespace slamags {

void MilConfig::validate() const {
  if (feat_dim <= 0) throw std::invalid_argument("mil: feat_dim must be positive");
  if (attn_dim <= 0) throw std::invalid_argument("mil: attn_dim must be positive");
  if (epochs < 0) throw std::invalid_argument("mil: epochs must be non-negative");
  if (lr <= 0.0) throw std::invalid_argument("mil: lr must be positive");
}

namespace {

Mat glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Mat m(fan_in, fan_out);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

AggregatorParams init_aggregator(const MilConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  AggregatorParams p;
  p.config = config;
  p.v = glorot_uniform(config.feat_dim, config.attn_dim, rng);
  p.u = glorot_uniform(config.feat_dim, config.attn_dim, rng);
  p.w = glorot_uniform(config.attn_dim, 1, rng);
  p.wc = glorot_uniform(config.feat_dim, 2, rng);
  p.bc = Mat(1, 2);
  return p;
}

MilGraph mil_graph(Tape& tape, const AggregatorParams& params, const Mat& features) {
  if (features.rows < 1)
    throw std::invalid_argument("mil_graph: a bag needs at least one instance");
  if (features.cols != params.config.feat_dim)
    throw std::invalid_argument("mil_graph: feature width does not match feat_dim");

  std::vector<Tensor> leaves;
  for (const Mat* m : params.tensors()) leaves.push_back(tape.leaf(*m, true));
  const Tensor h = tape.constant(features);
  const Tensor gate =
      tape.mul(tape.tanh(tape.matmul(h, leaves[0])), tape.sigmoid(tape.matmul(h, leaves[1])));
  const Tensor scores = tape.transpose(tape.matmul(gate, leaves[2]));  // 1 x N
  const Tensor attention = tape.softmax_rows(scores);
  const Tensor bag_emb = tape.matmul(attention, h);  // 1 x feat
  const Tensor logits = tape.add_rowvec(tape.matmul(bag_emb, leaves[3]), leaves[4]);
  return MilGraph{std::move(leaves), attention, logits};
}

BagPrediction mil_forward(const AggregatorParams& params, const Mat& features) {
  Tape tape;
  const MilGraph g = mil_graph(tape, params, features);
  BagPrediction pred;
  pred.bag_logits = g.logits.value().data;
  pred.attention = g.attention.value().data;
  pred.predicted_label = pred.bag_logits[1] > pred.bag_logits[0] ? 1 : 0;
  return pred;
}

std::vector<int> rank_instances(const BagPrediction& prediction) {
  std::vector<int> order(prediction.attention.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return prediction.attention[static_cast<size_t>(a)] >
           prediction.attention[static_cast<size_t>(b)];
  });
  return order;
}

Mat mil_inputs(const EncoderParams& encoder, const Bag& bag, const MilConfig& config) {
  const Mat feats = bag_features(bag);
  return config.uses_projection ? embed_projected(encoder, feats)
                                : embed_backbone(encoder, feats);
}

AggregatorParams train_mil_on_features(const std::vector<Mat>& bag_features,
                                       const std::vector<int>& bag_labels,
                                       const MilConfig& config, uint64_t seed) {
  config.validate();
  if (bag_features.size() != bag_labels.size())
    throw std::invalid_argument("train_mil: one label per bag required");
  int n_pos = 0;
  for (int label : bag_labels) {
    if (label != 0 && label != 1)
      throw std::invalid_argument("train_mil: bag labels must be 0 or 1");
    n_pos += label;
  }
  if (n_pos == 0 || n_pos == static_cast<int>(bag_labels.size()))
    throw std::invalid_argument("train_mil: need at least one bag of each class");

  AggregatorParams params = init_aggregator(config, derive_seed(seed, Stream::MilInit));
  if (config.epochs == 0) return params;

  ScheduleConfig schedule;
  schedule.base_lr = config.lr;
  schedule.warmup_epochs = 0;
  schedule.total_epochs = config.epochs;
  schedule.steps_per_epoch = static_cast<int>(bag_features.size());
  schedule.final_lr = 0.0;

  OptimizerState opt =
      OptimizerState::make(config.optimizer, total_size(std::as_const(params).tensors()));
  Rng shuffle_rng(derive_seed(seed, Stream::MilShuffle));
  std::vector<size_t> order(bag_features.size());
  std::iota(order.begin(), order.end(), size_t{0});

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (const size_t b : order) {
      Tape tape;
      const MilGraph g = mil_graph(tape, params, bag_features[b]);
      const Tensor loss = cross_entropy_loss(tape, g.logits, {bag_labels[b]});
      const GradMap grads = tape.backward(loss);
      std::vector<double> flat_grad;
      flat_grad.reserve(opt.m.size());
      for (const Tensor& leaf : g.leaves) {
        const Mat& gm = grads.at(leaf);
        flat_grad.insert(flat_grad.end(), gm.data.begin(), gm.data.end());
      }
      const std::vector<double> flat =
          apply_update(flatten(std::as_const(params).tensors()), flat_grad, opt,
                       lr_at(step, schedule));
      unflatten(flat, params.tensors());
      ++step;
    }
  }
  return params;
}

AggregatorParams train_mil(const std::vector<Bag>& train_bags,
                           const EncoderParams& encoder, const MilConfig& config,
                           uint64_t seed) {
  std::vector<Mat> feats;
  std::vector<int> labels;
  feats.reserve(train_bags.size());
  for (const Bag& bag : train_bags) {
    feats.push_back(mil_inputs(encoder, bag, config));
    labels.push_back(bag.bag_label);
  }
  return train_mil_on_features(feats, labels, config, seed);
}

void save_aggregator(const std::string& path, const AggregatorParams& params) {
  SlagFile file;
  file.kind = kKindAggregator;
  file.meta = {static_cast<uint32_t>(params.config.feat_dim),
               static_cast<uint32_t>(params.config.attn_dim),
               params.config.uses_projection ? 1u : 0u};
  file.payload = flatten(params.tensors());
  save_slag(path, file);
}

AggregatorParams load_aggregator(const std::string& path) {
  const SlagFile file = load_slag(path);
  if (file.kind != kKindAggregator)
    throw std::runtime_error("load_aggregator: not an aggregator checkpoint");
  if (file.meta.size() != 3)
    throw std::runtime_error("load_aggregator: bad metadata block");
  MilConfig config;
  config.feat_dim = static_cast<int>(file.meta[0]);
  config.attn_dim = static_cast<int>(file.meta[1]);
  config.uses_projection = file.meta[2] != 0;
  config.validate();
  AggregatorParams params = init_aggregator(config, 0);
  if (file.payload.size() != total_size(std::as_const(params).tensors()))
    throw std::runtime_error("load_aggregator: payload size mismatch");
  unflatten(file.payload, params.tensors());
  for (const Mat* m : std::as_const(params).tensors())
    if (!m->all_finite()) throw std::runtime_error("load_aggregator: non-finite parameter");
  return params;
}

}  // namespace slamags
