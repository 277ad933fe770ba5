#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "slamags/config.hpp"

using namespace slamags;

TEST_CASE("defaults validate and cover the full comparison grid") {
  const ExperimentConfig c = default_experiment_config();
  CHECK_NOTHROW(c.validate());
  CHECK(c.methods.size() == 5);
  CHECK(c.methods.front() == "weakly_supervised");
  CHECK(c.methods.back() == "slam_ags");
  CHECK(c.witness_rates == std::vector<double>{0.10, 0.05, 0.01, 0.005});
  CHECK(c.seeds == std::vector<uint64_t>{0, 1, 2, 3, 4});
  CHECK(c.dataset.dim == c.pretrain.encoder.input_dim);
  CHECK(c.jobs == 1);
}

TEST_CASE("dump/parse round-trips every field") {
  ExperimentConfig c = default_experiment_config();
  c.dataset.dim = 16;
  c.dataset.cluster_separation = 2.5;
  c.dataset.overlap_noise = 0.1;
  c.dataset.n_train_bags = 8;
  c.pretrain.encoder.input_dim = 16;
  c.pretrain.encoder.hidden_dim = 24;
  c.pretrain.encoder.activation = Activation::Relu;
  c.pretrain.augment.dropout_p = 0.2;
  c.pretrain.epochs = 12;
  c.pretrain.warmup_epochs = 3;
  c.pretrain.base_lr = 5e-4;
  c.pretrain.optimizer = OptimizerKind::SgdMomentum;
  c.mil.attn_dim = 12;
  c.mil.uses_projection = true;
  c.methods = {"slam_ags", "simclr"};
  c.witness_rates = {0.2, 0.02};
  c.seeds = {7, 9};
  c.out_dir = "elsewhere";
  c.jobs = 3;

  const ExperimentConfig back = parse_experiment_config(dump_experiment_config(c));
  CHECK(back.dataset.dim == 16);
  CHECK(back.dataset.cluster_separation == 2.5);
  CHECK(back.dataset.overlap_noise == 0.1);
  CHECK(back.dataset.n_train_bags == 8);
  CHECK(back.pretrain.encoder.hidden_dim == 24);
  CHECK(back.pretrain.encoder.activation == Activation::Relu);
  CHECK(back.pretrain.augment.dropout_p == 0.2);
  CHECK(back.pretrain.epochs == 12);
  CHECK(back.pretrain.warmup_epochs == 3);
  CHECK(back.pretrain.base_lr == 5e-4);
  CHECK(back.pretrain.optimizer == OptimizerKind::SgdMomentum);
  CHECK(back.mil.attn_dim == 12);
  CHECK(back.mil.uses_projection == true);
  CHECK(back.methods == c.methods);
  CHECK(back.witness_rates == c.witness_rates);
  CHECK(back.seeds == c.seeds);
  CHECK(back.out_dir == "elsewhere");
  CHECK(back.jobs == 3);
  CHECK(dump_experiment_config(back) == dump_experiment_config(c));
}

TEST_CASE("missing keys fall back to defaults") {
  const ExperimentConfig c = parse_experiment_config(R"({"jobs": 2})");
  const ExperimentConfig d = default_experiment_config();
  CHECK(c.jobs == 2);
  CHECK(c.pretrain.epochs == d.pretrain.epochs);
  CHECK(c.witness_rates == d.witness_rates);
  CHECK(config_hash(c) == config_hash(d));
}

TEST_CASE("unknown or mistyped fields are reported by path") {
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"learning_rate": 1})"),
                       doctest::Contains("unknown key \"learning_rate\""),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(R"({"pretrain": {"encoder": {"hiden_dim": 8}}})"),
      doctest::Contains("pretrain.encoder"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"pretrain": {"epochs": "ten"}})"),
                       doctest::Contains("pretrain.epochs"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_experiment_config("{"),
                       doctest::Contains("invalid JSON"), std::invalid_argument);
}

TEST_CASE("semantic validation catches bad values with field names") {
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"methods": ["mgda"]})"),
                       doctest::Contains("methods"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"witness_rates": [0.1, 0.1]})"),
                       doctest::Contains("witness_rates"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"witness_rates": [0.0]})"),
                       doctest::Contains("witness_rates"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"seeds": []})"),
                       doctest::Contains("seeds"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"jobs": 0})"),
                       doctest::Contains("jobs"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"dataset": {"dim": 8}})"),
                       doctest::Contains("input_dim"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(R"({"pretrain": {"optimizer": "rmsprop"}})"),
      doctest::Contains("pretrain.optimizer"), std::invalid_argument);
}

TEST_CASE("hash tracks exactly the fields that shape a cell's outcome") {
  const ExperimentConfig base = default_experiment_config();
  const std::string h = config_hash(base);
  CHECK(h.size() == 16);

  // Selection and placement knobs leave results untouched, so completed
  // cells stay reusable when they change.
  ExperimentConfig c = base;
  c.out_dir = "other";
  c.jobs = 8;
  c.methods.pop_back();
  c.witness_rates.pop_back();
  c.seeds.push_back(5);
  CHECK(config_hash(c) == h);

  auto differs = [&](void (*mutate)(ExperimentConfig*)) {
    ExperimentConfig m = base;
    mutate(&m);
    return config_hash(m) != h;
  };
  CHECK(differs(+[](ExperimentConfig* m) { m->dataset.cluster_separation = 0.0; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->dataset.overlap_noise = 0.3; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->dataset.dim = 16; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->dataset.n_train_bags = 20; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->pretrain.epochs = 151; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->pretrain.batch_size = 32; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->pretrain.base_lr = 2e-3; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->pretrain.tau_ntxent = 0.4; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->pretrain.encoder.proj_dim = 8; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->pretrain.augment.jitter_sigma = 0.2; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->mil.epochs = 51; }));
  CHECK(differs(+[](ExperimentConfig* m) { m->mil.uses_projection = true; }));
}

TEST_CASE("file round-trip and open failure") {
  const std::string path = "config_roundtrip.json";
  ExperimentConfig c = default_experiment_config();
  c.seeds = {11};
  save_experiment_config(path, c);
  const ExperimentConfig back = load_experiment_config(path);
  CHECK(back.seeds == std::vector<uint64_t>{11});
  CHECK(config_hash(back) == config_hash(c));
  std::remove(path.c_str());
  CHECK_THROWS_WITH_AS(load_experiment_config("no_such_config.json"),
                       doctest::Contains("cannot open"), std::invalid_argument);
}

TEST_CASE("effective MIL dimensions follow the encoder") {
  ExperimentConfig c = default_experiment_config();
  c.pretrain.encoder.feat_dim = 24;
  c.pretrain.encoder.proj_dim = 6;
  CHECK(effective_mil_config(c).feat_dim == 24);
  c.mil.uses_projection = true;
  CHECK(effective_mil_config(c).feat_dim == 6);
}
