#pragma once

#include <string>
#include <vector>

namespace slamags {

// Binary F1 for the positive class. Degenerate cases follow the usual
// convention: no positive predictions and no positive labels -> 1.0;
// positive predictions but no positive labels -> 0.0.
double f1_score(const std::vector<int>& predictions, const std::vector<int>& labels);

// Fraction of a bag's key instances found in the top-k of the ranking.
// Undefined (throws) when the bag has no key instances.
double recall_at_k(const std::vector<int>& ranking,
                   const std::vector<int>& instance_labels, int k);

// Retrieval depth: top 40% of the bag, rounded.
int k_for(int bag_size);

struct MetricsRecord {
  std::string method;
  double witness_rate = 0.0;
  uint64_t seed = 0;
  double f1 = 0.0;
  double recall_at_k = 0.0;
  int k = 0;
};

struct AggregateRecord {
  std::string method;
  double witness_rate = 0.0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
  double recall_mean = 0.0;
  double recall_std = 0.0;
  int k = 0;
  int n_seeds = 0;
};

// Groups by (method, witness_rate) in first-appearance order; sample standard
// deviation (n-1 denominator, 0 for a single record).
std::vector<AggregateRecord> aggregate(const std::vector<MetricsRecord>& records);

// results CSV: method,witness_rate,seed,f1,recall_at_k,k (floats round-trip
// bit-exactly). aggregate CSV: six-decimal fixed formatting.
void save_results_csv(const std::string& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> load_results_csv(const std::string& path);
void save_aggregate_csv(const std::string& path, const std::vector<AggregateRecord>& records);

}  // namespace slamags
