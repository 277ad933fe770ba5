#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slamags/config.hpp"
#include "slamags/data.hpp"
#include "slamags/eval.hpp"
#include "slamags/mil.hpp"
#include "slamags/pretrain.hpp"

namespace slamags {

struct CellKey {
  std::string method;
  double witness_rate = 0.0;
  uint64_t seed = 0;
};

// Shortest round-trip decimal form of a witness rate ("0.05").
std::string format_witness_rate(double witness_rate);

// Stable identifier used in file names and the manifest:
// "<method>_wr<rate>_seed<seed>".
std::string cell_id(const CellKey& key);

// The corpus for one (witness_rate, seed) grid cell. Bag size is the larger of
// the configured size and the witness-rate floor, so low rates keep at least a
// couple of positive instances per positive bag; every method in the cell sees
// the identical dataset.
DatasetConfig cell_dataset_config(const ExperimentConfig& config,
                                  double witness_rate, uint64_t seed);

struct CellEval {
  double f1 = 0.0;        // over all test bags
  double recall = 0.0;    // recall@k averaged over positive test bags
  int k = 0;              // 40% of the bag size
};

CellEval evaluate_cell(const EncoderParams& encoder, const AggregatorParams& aggregator,
                       const std::vector<Bag>& test_bags);

// Pretrains, fits the aggregator, and evaluates one cell. When artifact_dir
// is nonempty, writes <id>_encoder.slag, <id>_aggregator.slag, and
// <id>_runlog.csv there. Deterministic per (key, dataset, config).
MetricsRecord run_cell(const CellKey& key, const Dataset& data,
                       const ExperimentConfig& config, const std::string& artifact_dir);

// Resume bookkeeping for a sweep output directory.
struct SweepManifest {
  std::string config_hash;
  std::vector<std::string> completed;        // cell ids with rows in results.csv
  std::map<std::string, std::string> failed; // cell id -> error, retried on resume
};

SweepManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const SweepManifest& manifest);

struct CellFailure {
  CellKey key;
  std::string error;
};

struct SweepOutcome {
  std::vector<MetricsRecord> records;  // everything now in results.csv
  std::vector<CellFailure> failures;
  int cells_run = 0;
  int cells_skipped = 0;
};

// Runs the full methods x witness_rates x seeds grid under config.jobs
// workers. Output under config.out_dir: config.json, results.csv,
// manifest.json, cells/. Cells already completed per the manifest are
// skipped; a manifest written under a different semantic config is refused.
// Individual cell failures are recorded and do not stop the sweep.
SweepOutcome run_sweep(const ExperimentConfig& config,
                       const std::function<void(const std::string&)>& log = {});

// Writes one dataset CSV per witness rate (train bags first, then test bags;
// the manifest records the split point) plus datasets_manifest.json holding
// the config hash, the generating seed, and the file list. Byte-identical
// across reruns. Returns the CSV paths.
std::vector<std::string> write_datasets(const ExperimentConfig& config, uint64_t seed,
                                        const std::string& dir);

}  // namespace slamags
