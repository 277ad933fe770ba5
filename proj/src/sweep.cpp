#include "slamags/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace slamags {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("sweep: cannot write " + tmp);
    out << text;
    if (!out) throw std::runtime_error("sweep: failed writing " + tmp);
  }
  fs::rename(tmp, path);
}

}  // namespace

std::string format_witness_rate(double witness_rate) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), witness_rate);
  if (ec != std::errc()) throw std::runtime_error("sweep: cannot format witness rate");
  return std::string(buf, ptr);
}

std::string cell_id(const CellKey& key) {
  return key.method + "_wr" + format_witness_rate(key.witness_rate) + "_seed" +
         std::to_string(key.seed);
}

DatasetConfig cell_dataset_config(const ExperimentConfig& config, double witness_rate,
                                  uint64_t seed) {
  DatasetConfig dc = config.dataset;
  dc.witness_rate = witness_rate;
  dc.bag_size = std::max(config.dataset.bag_size, bag_size_for(witness_rate));
  dc.seed = seed;
  return dc;
}

CellEval evaluate_cell(const EncoderParams& encoder, const AggregatorParams& aggregator,
                       const std::vector<Bag>& test_bags) {
  if (test_bags.empty()) throw std::invalid_argument("evaluate: no test bags");
  std::vector<int> truth, predicted;
  double recall_sum = 0.0;
  int n_positive = 0;
  int k = -1;
  for (const Bag& bag : test_bags) {
    const Mat features = mil_inputs(encoder, bag, aggregator.config);
    const BagPrediction pred = mil_forward(aggregator, features);
    truth.push_back(bag.bag_label);
    predicted.push_back(pred.predicted_label);
    if (bag.bag_label != 1) continue;
    const int bag_k = k_for(static_cast<int>(bag.patches.size()));
    if (k < 0) k = bag_k;
    if (bag_k != k)
      throw std::invalid_argument("evaluate: positive test bags differ in size");
    std::vector<int> labels;
    labels.reserve(bag.patches.size());
    for (const Patch& p : bag.patches) labels.push_back(p.instance_label);
    recall_sum += recall_at_k(rank_instances(pred), labels, k);
    ++n_positive;
  }
  if (n_positive == 0) throw std::invalid_argument("evaluate: no positive test bags");
  CellEval out;
  out.f1 = f1_score(truth, predicted);
  out.recall = recall_sum / n_positive;
  out.k = k;
  return out;
}

MetricsRecord run_cell(const CellKey& key, const Dataset& data,
                       const ExperimentConfig& config, const std::string& artifact_dir) {
  const Method method = method_from_string(key.method);
  PretrainResult pre = pretrain(method, data.train_bags, config.pretrain, key.seed);
  const MilConfig mil_config = effective_mil_config(config);
  const AggregatorParams aggregator =
      train_mil(data.train_bags, pre.params, mil_config, key.seed);
  const CellEval eval = evaluate_cell(pre.params, aggregator, data.test_bags);

  if (!artifact_dir.empty()) {
    const std::string stem = (fs::path(artifact_dir) / cell_id(key)).string();
    save_encoder(stem + "_encoder.slag", pre.params);
    save_aggregator(stem + "_aggregator.slag", aggregator);
    pre.log.checkpoint_path = stem + "_encoder.slag";
    save_run_log_csv(stem + "_runlog.csv", pre.log);
  }

  MetricsRecord record;
  record.method = key.method;
  record.witness_rate = key.witness_rate;
  record.seed = key.seed;
  record.f1 = eval.f1;
  record.recall_at_k = eval.recall;
  record.k = eval.k;
  return record;
}

SweepManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sweep: cannot open " + path);
  json j;
  try {
    std::ostringstream text;
    text << in.rdbuf();
    j = json::parse(text.str());
  } catch (const json::exception& e) {
    throw std::runtime_error("sweep: invalid manifest " + path + ": " + e.what());
  }
  SweepManifest m;
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.completed = j.at("completed").get<std::vector<std::string>>();
    if (j.contains("failed"))
      m.failed = j.at("failed").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw std::runtime_error("sweep: invalid manifest " + path + ": " + e.what());
  }
  return m;
}

void save_manifest(const std::string& path, const SweepManifest& manifest) {
  json j;
  j["config_hash"] = manifest.config_hash;
  j["completed"] = manifest.completed;
  j["failed"] = manifest.failed;
  write_text_atomic(path, j.dump(2) + "\n");
}

SweepOutcome run_sweep(const ExperimentConfig& config,
                       const std::function<void(const std::string&)>& log) {
  config.validate();
  const std::string hash = config_hash(config);
  const fs::path out_dir(config.out_dir);
  const fs::path cells_dir = out_dir / "cells";
  fs::create_directories(cells_dir);
  const std::string manifest_path = (out_dir / "manifest.json").string();
  const std::string results_path = (out_dir / "results.csv").string();
  save_experiment_config((out_dir / "config.json").string(), config);

  SweepManifest manifest;
  manifest.config_hash = hash;
  if (fs::exists(manifest_path)) {
    const SweepManifest previous = load_manifest(manifest_path);
    if (previous.config_hash != hash)
      throw std::invalid_argument(
          "config: " + config.out_dir +
          " holds results for a different config (hash " + previous.config_hash +
          " vs " + hash + "); use a fresh out_dir");
    manifest = previous;
  }

  // Canonical grid order; completed cells keep their rows and are skipped.
  const std::set<std::string> done(manifest.completed.begin(), manifest.completed.end());
  SweepOutcome outcome;
  std::vector<CellKey> todo;
  std::map<std::string, size_t> rank;
  std::vector<std::pair<double, uint64_t>> datasets_needed;
  for (double wr : config.witness_rates) {
    for (uint64_t seed : config.seeds) {
      bool dataset_used = false;
      for (const std::string& method : config.methods) {
        const CellKey key{method, wr, seed};
        rank.emplace(cell_id(key), rank.size());
        if (done.count(cell_id(key))) {
          ++outcome.cells_skipped;
          continue;
        }
        todo.push_back(key);
        dataset_used = true;
      }
      if (dataset_used) datasets_needed.emplace_back(wr, seed);
    }
  }

  // Completed rows survive even when the current grid no longer covers them.
  if (fs::exists(results_path)) {
    for (MetricsRecord& r : load_results_csv(results_path)) {
      const CellKey key{r.method, r.witness_rate, r.seed};
      if (done.count(cell_id(key))) outcome.records.push_back(std::move(r));
    }
  }

  std::map<std::pair<double, uint64_t>, Dataset> datasets;
  for (const auto& [wr, seed] : datasets_needed)
    datasets.emplace(std::make_pair(wr, seed),
                     generate_dataset(cell_dataset_config(config, wr, seed)));

  // Rows outside the current grid keep their relative order after it.
  auto rank_of = [&rank](const MetricsRecord& r) {
    const auto it = rank.find(cell_id({r.method, r.witness_rate, r.seed}));
    return it != rank.end() ? it->second : rank.size();
  };
  auto sort_records = [&](std::vector<MetricsRecord>* records) {
    std::stable_sort(records->begin(), records->end(),
                     [&](const MetricsRecord& a, const MetricsRecord& b) {
                       return rank_of(a) < rank_of(b);
                     });
  };

  std::mutex mu;
  std::atomic<size_t> next{0};
  const int n_workers =
      std::max(1, std::min<int>(config.jobs, static_cast<int>(todo.size())));
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const CellKey& key = todo[i];
      const std::string id = cell_id(key);
      try {
        const MetricsRecord record =
            run_cell(key, datasets.at({key.witness_rate, key.seed}), config,
                     cells_dir.string());
        std::lock_guard<std::mutex> lock(mu);
        outcome.records.push_back(record);
        ++outcome.cells_run;
        sort_records(&outcome.records);
        save_results_csv(results_path, outcome.records);
        manifest.completed.push_back(id);
        manifest.failed.erase(id);
        save_manifest(manifest_path, manifest);
        if (log)
          log("done " + id + "  f1=" + std::to_string(record.f1) +
              "  recall@" + std::to_string(record.k) + "=" +
              std::to_string(record.recall_at_k));
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        outcome.failures.push_back({key, e.what()});
        manifest.failed[id] = e.what();
        save_manifest(manifest_path, manifest);
        if (log) log("FAILED " + id + ": " + e.what());
      }
    }
  };

  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // An empty grid still deserves a results file and manifest.
  std::lock_guard<std::mutex> lock(mu);
  sort_records(&outcome.records);
  save_results_csv(results_path, outcome.records);
  save_manifest(manifest_path, manifest);
  return outcome;
}

std::vector<std::string> write_datasets(const ExperimentConfig& config, uint64_t seed,
                                        const std::string& dir) {
  config.validate();
  fs::create_directories(dir);
  json files;
  std::vector<std::string> paths;
  for (double wr : config.witness_rates) {
    const Dataset data = generate_dataset(cell_dataset_config(config, wr, seed));
    std::vector<Bag> all = data.train_bags;
    all.insert(all.end(), data.test_bags.begin(), data.test_bags.end());
    const std::string name = "dataset_wr" + format_witness_rate(wr) + ".csv";
    save_bags_csv((fs::path(dir) / name).string(), all);
    files[format_witness_rate(wr)] = name;
    paths.push_back((fs::path(dir) / name).string());
  }
  json j;
  j["config_hash"] = config_hash(config);
  j["seed"] = seed;
  j["n_train_bags"] = config.dataset.n_train_bags;
  j["files"] = files;
  write_text_atomic((fs::path(dir) / "datasets_manifest.json").string(),
                    j.dump(2) + "\n");
  return paths;
}

}  // namespace slamags
