#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace slamags {

// Named sub-stream tags. Every run derives its RNG streams from one seed via
// derive_seed(seed, tag), so each consumer advances independently and a run
// is reproducible from (config, seed) alone.
enum class Stream : uint64_t {
  DataCenters = 1,
  DataTrain = 2,
  DataTest = 3,
  EncoderInit = 4,
  Sampler = 5,
  Augment = 6,
  HeadInit = 7,
  MilInit = 8,
  MilShuffle = 9,
};

uint64_t splitmix64(uint64_t x);
uint64_t derive_seed(uint64_t base, uint64_t tag);
inline uint64_t derive_seed(uint64_t base, Stream tag) {
  return derive_seed(base, static_cast<uint64_t>(tag));
}

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distributions here are hand-rolled because std::*_distribution output is
// implementation-defined and would break bit-for-bit reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // [0, n), unbiased via rejection
  int uniform_int(int n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace slamags
