#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slamags/mat.hpp"
#include "slamags/rng.hpp"

namespace slamags {

// One cell image's feature vector plus its labels. Slide-negative bags only
// contain normal cells, so slide_label == 0 implies instance_label == 0.
struct Patch {
  std::vector<double> features;
  int instance_label = 0;  // 0 normal, 1 abnormal
  int slide_label = 0;     // 0 negative slide, 1 positive slide
  int subtype = 0;         // 0 normal, 1..7 abnormal subtype
};

struct Bag {
  std::vector<Patch> patches;
  int bag_label = 0;
  int witness_count = 0;
};

struct DatasetConfig {
  int dim = 32;
  int n_subtype_clusters = 7;
  double cluster_separation = 3.0;
  // Fraction of patches whose features are drawn around a uniformly chosen
  // cluster center instead of their own class center (label-free overlap).
  double overlap_noise = 0.2;
  int bag_size = 100;
  int n_train_bags = 18;
  int n_test_bags = 6;
  double witness_rate = 0.10;
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct Dataset {
  std::vector<Bag> train_bags;
  std::vector<Bag> test_bags;
};

// Smallest bag size that realizes the witness rate with >= 1 key instance.
int bag_size_for(double witness_rate);

// Key instances per positive bag: round(witness_rate * bag_size), floor 1.
int key_instances_for(double witness_rate, int bag_size);

// Gaussian clusters around a normal center and n_subtype_clusters abnormal
// centers at distance cluster_separation. Deterministic per config.seed;
// train and test patches come from independent derived streams.
Dataset generate_dataset(const DatasetConfig& config);

// Flat view over every patch in the given bags, in bag order.
std::vector<const Patch*> patch_pool(const std::vector<Bag>& bags);

// Stacks patches into a (n, dim) feature matrix.
Mat features_of(const std::vector<const Patch*>& patches);
Mat bag_features(const Bag& bag);

// Draws class-balanced pretraining batches: each batch holds batch_size/2
// slide-positive then batch_size/2 slide-negative patches. An epoch is one
// pass over a fresh shuffled permutation of each class pool, both truncated
// to the smaller pool's length.
class BalancedSampler {
 public:
  BalancedSampler(const std::vector<Bag>& bags, uint64_t seed);

  std::vector<const Patch*> next_batch(int batch_size);
  int steps_per_epoch(int batch_size) const;
  size_t epoch_length() const { return epoch_len_; }

 private:
  void reshuffle();

  std::vector<const Patch*> pos_;
  std::vector<const Patch*> neg_;
  std::vector<size_t> pos_order_;
  std::vector<size_t> neg_order_;
  size_t epoch_len_ = 0;
  size_t cursor_ = 0;
  Rng rng_;
};

// CSV schema (header required):
//   bag_id,slide_label,instance_label,subtype,f0..f{d-1}
// Floats are written with enough digits to round-trip bit-exactly.
void save_bags_csv(const std::string& path, const std::vector<Bag>& bags);

struct PoolRow {
  int bag_id = 0;
  Patch patch;
};

// Parses and validates a dataset CSV; malformed input is reported with its
// 1-based line number.
std::vector<PoolRow> load_csv_dataset(const std::string& path);

// Groups rows into bags. Rows of one bag must be contiguous.
std::vector<Bag> bags_from_pool(const std::vector<PoolRow>& rows);

}  // namespace slamags
