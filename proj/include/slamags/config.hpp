#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slamags/data.hpp"
#include "slamags/mil.hpp"
#include "slamags/pretrain.hpp"

namespace slamags {

// Everything a sweep needs. `dataset.witness_rate`, `dataset.bag_size`, and
// `dataset.seed` are derived per grid cell and therefore not part of the
// config file; `mil.feat_dim` follows the encoder dimensions.
struct ExperimentConfig {
  DatasetConfig dataset;
  PretrainConfig pretrain;
  MilConfig mil;
  std::vector<std::string> methods;
  std::vector<double> witness_rates;
  std::vector<uint64_t> seeds;
  std::string out_dir = "out";
  int jobs = 1;

  void validate() const;  // throws std::invalid_argument
};

ExperimentConfig default_experiment_config();

// JSON round-trip. Loading tolerates missing keys (defaults apply) but
// rejects unknown keys with a field-level message.
std::string dump_experiment_config(const ExperimentConfig& config);
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& config);

// Hash over every semantically meaningful field (out_dir and jobs excluded),
// as a 16-digit hex string. Identical hash <=> identical experiment.
std::string config_hash(const ExperimentConfig& config);

// MIL setup with feat_dim filled in from the encoder dimensions, honoring
// mil.uses_projection.
MilConfig effective_mil_config(const ExperimentConfig& config);

}  // namespace slamags
