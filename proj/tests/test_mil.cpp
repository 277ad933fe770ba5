#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "slamags/flat.hpp"
#include "slamags/losses.hpp"
#include "slamags/mil.hpp"
#include "slamags/rng.hpp"
#include "testutil.hpp"

using namespace slamags;
using namespace slamags::testutil;

namespace {

MilConfig tiny_config() {
  MilConfig c;
  c.feat_dim = 3;
  c.attn_dim = 4;
  c.epochs = 50;
  c.lr = 1e-2;  // the toy fixtures see far fewer steps than a real corpus
  return c;
}

Mat random_mat(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

// Two separable blobs: positive bags carry one instance near +4*e0,
// negative bags sit near -4*e0.
void separable_fixture(std::vector<Mat>* feats, std::vector<int>* labels) {
  Rng rng(31);
  for (int b = 0; b < 8; ++b) {
    const bool positive = b % 2 == 0;
    Mat m(6, 3);
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j)
        m.at(i, j) = 0.3 * rng.normal() + ((positive && i == 0) ? 4.0 : -4.0) * (j == 0);
    feats->push_back(m);
    labels->push_back(positive ? 1 : 0);
  }
}

}  // namespace

TEST_CASE("attention is a distribution over instances") {
  const MilConfig config = tiny_config();
  const AggregatorParams params = init_aggregator(config, 3);
  for (const int n : {1, 2, 7, 40}) {
    const BagPrediction pred = mil_forward(params, random_mat(n, 3, 100 + n));
    REQUIRE(static_cast<int>(pred.attention.size()) == n);
    double sum = 0.0;
    for (double a : pred.attention) {
      CHECK(a >= 0.0);
      sum += a;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(pred.bag_logits.size() == 2);
  }
}

TEST_CASE("a singleton bag gets attention exactly one") {
  const AggregatorParams params = init_aggregator(tiny_config(), 4);
  const BagPrediction pred = mil_forward(params, random_mat(1, 3, 9));
  CHECK(pred.attention == std::vector<double>{1.0});
}

TEST_CASE("duplicate instances share attention exactly") {
  const AggregatorParams params = init_aggregator(tiny_config(), 5);
  Mat m(3, 3);
  for (int j = 0; j < 3; ++j) {
    m.at(0, j) = 0.5 * j - 1.0;
    m.at(1, j) = m.at(0, j);  // duplicate of row 0
    m.at(2, j) = 2.0 - j;
  }
  const BagPrediction pred = mil_forward(params, m);
  CHECK(pred.attention[0] == pred.attention[1]);
}

TEST_CASE("permuting instances permutes attention and keeps logits") {
  const AggregatorParams params = init_aggregator(tiny_config(), 6);
  const Mat m = random_mat(9, 3, 77);
  const BagPrediction base = mil_forward(params, m);

  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(13);
  rng.shuffle(perm);
  Mat shuffled(9, 3);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 3; ++j) shuffled.at(i, j) = m.at(perm[static_cast<size_t>(i)], j);

  const BagPrediction moved = mil_forward(params, shuffled);
  for (int i = 0; i < 9; ++i) {
    const double want = base.attention[static_cast<size_t>(perm[static_cast<size_t>(i)])];
    CHECK(std::abs(moved.attention[static_cast<size_t>(i)] - want) <= 1e-12 * want);
  }
  for (int c = 0; c < 2; ++c)
    CHECK(std::abs(moved.bag_logits[static_cast<size_t>(c)] -
                   base.bag_logits[static_cast<size_t>(c)]) <=
          1e-12 * (1.0 + std::abs(base.bag_logits[static_cast<size_t>(c)])));
}

TEST_CASE("forward pass validates its inputs") {
  const AggregatorParams params = init_aggregator(tiny_config(), 6);
  CHECK_THROWS_AS(mil_forward(params, Mat(0, 3)), std::invalid_argument);
  CHECK_THROWS_AS(mil_forward(params, Mat(2, 5)), std::invalid_argument);
}

TEST_CASE("ranking sorts by attention with stable ties") {
  BagPrediction pred;
  pred.attention = {0.1, 0.7, 0.2};
  CHECK(rank_instances(pred) == std::vector<int>{1, 2, 0});

  pred.attention = {0.25, 0.25, 0.25, 0.25};
  CHECK(rank_instances(pred) == std::vector<int>{0, 1, 2, 3});

  pred.attention = {0.2, 0.4, 0.2, 0.2};
  CHECK(rank_instances(pred) == std::vector<int>{1, 0, 2, 3});
}

TEST_CASE("ranking agrees with a reference stable sort on random scores") {
  Rng rng(222);
  for (int t = 0; t < 200; ++t) {
    BagPrediction pred;
    pred.attention.resize(17);
    for (double& a : pred.attention) a = rng.uniform_int(5) * 0.1;  // force ties
    std::vector<int> want(17);
    std::iota(want.begin(), want.end(), 0);
    std::stable_sort(want.begin(), want.end(), [&](int a, int b) {
      return pred.attention[static_cast<size_t>(a)] > pred.attention[static_cast<size_t>(b)];
    });
    CHECK(rank_instances(pred) == want);
  }
}

TEST_CASE("training loss gradient passes finite differences") {
  const MilConfig config = tiny_config();
  const AggregatorParams params = init_aggregator(config, 8);
  const Mat feats = random_mat(3, 3, 55);

  std::vector<Mat> inputs;
  for (const Mat* m : params.tensors()) inputs.push_back(*m);
  const LossBuilder build = [&](Tape& tape, const std::vector<Tensor>& leaves) {
    const Tensor h = tape.constant(feats);
    const Tensor gate =
        tape.mul(tape.tanh(tape.matmul(h, leaves[0])), tape.sigmoid(tape.matmul(h, leaves[1])));
    const Tensor attention = tape.softmax_rows(tape.transpose(tape.matmul(gate, leaves[2])));
    const Tensor logits =
        tape.add_rowvec(tape.matmul(tape.matmul(attention, h), leaves[3]), leaves[4]);
    return cross_entropy_loss(tape, logits, {1});
  };
  check_gradients(inputs, build);
}

TEST_CASE("separable bags are fit perfectly within the epoch budget") {
  std::vector<Mat> feats;
  std::vector<int> labels;
  separable_fixture(&feats, &labels);
  const AggregatorParams trained = train_mil_on_features(feats, labels, tiny_config(), 17);
  for (size_t b = 0; b < feats.size(); ++b) {
    const BagPrediction pred = mil_forward(trained, feats[b]);
    CHECK(pred.predicted_label == labels[b]);
  }
}

TEST_CASE("trained attention concentrates on the key instance") {
  std::vector<Mat> feats;
  std::vector<int> labels;
  separable_fixture(&feats, &labels);
  const AggregatorParams trained = train_mil_on_features(feats, labels, tiny_config(), 17);
  // In every positive bag the planted key sits at row 0.
  for (size_t b = 0; b < feats.size(); ++b) {
    if (labels[b] == 0) continue;
    const BagPrediction pred = mil_forward(trained, feats[b]);
    CHECK(rank_instances(pred)[0] == 0);
  }
}

TEST_CASE("zero-epoch training returns the initialization") {
  std::vector<Mat> feats;
  std::vector<int> labels;
  separable_fixture(&feats, &labels);
  MilConfig config = tiny_config();
  config.epochs = 0;
  const AggregatorParams trained = train_mil_on_features(feats, labels, config, 21);
  const AggregatorParams fresh = init_aggregator(config, derive_seed(21, Stream::MilInit));
  CHECK(flatten(std::as_const(trained).tensors()) == flatten(std::as_const(fresh).tensors()));
}

TEST_CASE("training is deterministic per seed") {
  std::vector<Mat> feats;
  std::vector<int> labels;
  separable_fixture(&feats, &labels);
  MilConfig config = tiny_config();
  config.epochs = 5;
  const AggregatorParams a = train_mil_on_features(feats, labels, config, 33);
  const AggregatorParams b = train_mil_on_features(feats, labels, config, 33);
  CHECK(flatten(std::as_const(a).tensors()) == flatten(std::as_const(b).tensors()));
  const AggregatorParams c = train_mil_on_features(feats, labels, config, 34);
  CHECK(flatten(std::as_const(a).tensors()) != flatten(std::as_const(c).tensors()));
}

TEST_CASE("degenerate corpora are rejected") {
  std::vector<Mat> feats = {random_mat(4, 3, 1), random_mat(4, 3, 2)};
  CHECK_THROWS_AS(train_mil_on_features(feats, {1, 1}, tiny_config(), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_mil_on_features(feats, {0, 0}, tiny_config(), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_mil_on_features(feats, {0}, tiny_config(), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_mil_on_features(feats, {0, 2}, tiny_config(), 1),
                  std::invalid_argument);
}

TEST_CASE("end-to-end training on encoder embeddings runs and discriminates") {
  DatasetConfig dc;
  dc.dim = 8;
  dc.bag_size = 20;
  dc.n_train_bags = 6;
  dc.n_test_bags = 2;
  dc.witness_rate = 0.25;
  dc.cluster_separation = 4.0;
  dc.overlap_noise = 0.0;
  dc.seed = 2;
  const Dataset ds = generate_dataset(dc);

  EncoderConfig ec;
  ec.input_dim = 8;
  ec.hidden_dim = 16;
  ec.feat_dim = 8;
  ec.proj_dim = 4;
  const EncoderParams encoder = init_encoder(ec, 3);

  MilConfig mc;
  mc.feat_dim = 8;
  mc.attn_dim = 8;
  mc.epochs = 60;
  mc.lr = 1e-2;
  const AggregatorParams trained = train_mil(ds.train_bags, encoder, mc, 5);

  int correct = 0;
  for (const Bag& bag : ds.train_bags) {
    const BagPrediction pred = mil_forward(trained, mil_inputs(encoder, bag, mc));
    correct += pred.predicted_label == bag.bag_label;
  }
  CHECK(correct >= 5);  // separable clusters, untuned encoder: near-perfect fit
}

TEST_CASE("aggregator checkpoints round-trip bitwise") {
  std::vector<Mat> feats;
  std::vector<int> labels;
  separable_fixture(&feats, &labels);
  MilConfig config = tiny_config();
  config.epochs = 3;
  const AggregatorParams trained = train_mil_on_features(feats, labels, config, 41);

  const std::string path = "tmp_aggregator.slag";
  save_aggregator(path, trained);
  const AggregatorParams loaded = load_aggregator(path);
  CHECK(flatten(std::as_const(loaded).tensors()) == flatten(std::as_const(trained).tensors()));
  CHECK(loaded.config.feat_dim == config.feat_dim);
  CHECK(loaded.config.attn_dim == config.attn_dim);
  CHECK(loaded.config.uses_projection == config.uses_projection);

  const Mat probe = random_mat(5, 3, 60);
  const BagPrediction a = mil_forward(trained, probe);
  const BagPrediction b = mil_forward(loaded, probe);
  CHECK(a.bag_logits == b.bag_logits);
  CHECK(a.attention == b.attention);
  std::remove(path.c_str());
}

TEST_CASE("encoder checkpoints are rejected by the aggregator loader") {
  EncoderConfig ec;
  const EncoderParams encoder = init_encoder(ec, 1);
  const std::string path = "tmp_enc_as_agg.slag";
  save_encoder(path, encoder);
  CHECK_THROWS_AS(static_cast<void>(load_aggregator(path)), std::runtime_error);
  std::remove(path.c_str());
}
