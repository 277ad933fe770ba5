#include "slamags/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace slamags {

void DatasetConfig::validate() const {
  if (dim <= 0) throw std::invalid_argument("dataset: dim must be positive");
  if (n_subtype_clusters <= 0)
    throw std::invalid_argument("dataset: n_subtype_clusters must be positive");
  if (cluster_separation < 0.0)
    throw std::invalid_argument("dataset: cluster_separation must be non-negative");
  if (overlap_noise < 0.0 || overlap_noise > 1.0)
    throw std::invalid_argument("dataset: overlap_noise must lie in [0,1]");
  if (bag_size <= 0) throw std::invalid_argument("dataset: bag_size must be positive");
  if (n_train_bags <= 0 || n_train_bags % 2 != 0)
    throw std::invalid_argument("dataset: n_train_bags must be positive and even");
  if (n_test_bags <= 0 || n_test_bags % 2 != 0)
    throw std::invalid_argument("dataset: n_test_bags must be positive and even");
  if (witness_rate <= 0.0 || witness_rate > 1.0)
    throw std::invalid_argument("dataset: witness_rate must lie in (0,1]");
  if (witness_rate * bag_size < 1.0 - 1e-12)
    throw std::invalid_argument("dataset: witness_rate * bag_size must be >= 1");
}

int bag_size_for(double witness_rate) {
  if (witness_rate <= 0.0 || witness_rate > 1.0)
    throw std::invalid_argument("bag_size_for: witness_rate must lie in (0,1]");
  const int needed = static_cast<int>(std::ceil(1.0 / witness_rate - 1e-12));
  return std::max(100, needed);
}

int key_instances_for(double witness_rate, int bag_size) {
  return std::max(1, static_cast<int>(std::llround(witness_rate * bag_size)));
}

namespace {

std::vector<std::vector<double>> make_centers(const DatasetConfig& config, Rng& rng) {
  // Index 0 is the normal center (origin); 1..n are abnormal subtype centers
  // at exactly cluster_separation from it, in random directions.
  std::vector<std::vector<double>> centers;
  centers.emplace_back(static_cast<size_t>(config.dim), 0.0);
  for (int c = 0; c < config.n_subtype_clusters; ++c) {
    std::vector<double> dir(static_cast<size_t>(config.dim));
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (double& x : dir) {
        x = rng.normal();
        norm_sq += x * x;
      }
    } while (norm_sq < 1e-12);
    const double scale = config.cluster_separation / std::sqrt(norm_sq);
    for (double& x : dir) x *= scale;
    centers.push_back(std::move(dir));
  }
  return centers;
}

Patch draw_patch(const DatasetConfig& config,
                 const std::vector<std::vector<double>>& centers, int subtype,
                 int slide_label, Rng& rng) {
  Patch p;
  p.subtype = subtype;
  p.instance_label = subtype == 0 ? 0 : 1;
  p.slide_label = slide_label;
  // Label-free overlap: sometimes draw around a uniformly chosen center.
  int center_idx = subtype;
  const double noise_roll = rng.uniform();
  if (noise_roll < config.overlap_noise)
    center_idx = rng.uniform_int(static_cast<int>(centers.size()));
  const std::vector<double>& center = centers[static_cast<size_t>(center_idx)];
  p.features.resize(static_cast<size_t>(config.dim));
  for (int j = 0; j < config.dim; ++j)
    p.features[static_cast<size_t>(j)] = center[static_cast<size_t>(j)] + rng.normal();
  return p;
}

std::vector<Bag> make_bags(const DatasetConfig& config,
                           const std::vector<std::vector<double>>& centers,
                           int n_bags, Rng& rng) {
  const int n_key = key_instances_for(config.witness_rate, config.bag_size);
  std::vector<Bag> bags;
  bags.reserve(static_cast<size_t>(n_bags));
  for (int b = 0; b < n_bags; ++b) {
    const bool positive = b < n_bags / 2;
    Bag bag;
    bag.bag_label = positive ? 1 : 0;
    bag.witness_count = positive ? n_key : 0;
    bag.patches.reserve(static_cast<size_t>(config.bag_size));
    if (positive) {
      for (int i = 0; i < n_key; ++i) {
        const int subtype = 1 + rng.uniform_int(config.n_subtype_clusters);
        bag.patches.push_back(draw_patch(config, centers, subtype, 1, rng));
      }
    }
    while (static_cast<int>(bag.patches.size()) < config.bag_size)
      bag.patches.push_back(draw_patch(config, centers, 0, bag.bag_label, rng));
    rng.shuffle(bag.patches);
    bags.push_back(std::move(bag));
  }
  return bags;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Rng center_rng(derive_seed(config.seed, Stream::DataCenters));
  const std::vector<std::vector<double>> centers = make_centers(config, center_rng);

  Dataset ds;
  Rng train_rng(derive_seed(config.seed, Stream::DataTrain));
  ds.train_bags = make_bags(config, centers, config.n_train_bags, train_rng);
  Rng test_rng(derive_seed(config.seed, Stream::DataTest));
  ds.test_bags = make_bags(config, centers, config.n_test_bags, test_rng);
  return ds;
}

std::vector<const Patch*> patch_pool(const std::vector<Bag>& bags) {
  std::vector<const Patch*> pool;
  for (const Bag& bag : bags)
    for (const Patch& p : bag.patches) pool.push_back(&p);
  return pool;
}

Mat features_of(const std::vector<const Patch*>& patches) {
  if (patches.empty()) return Mat(0, 0);
  const int dim = static_cast<int>(patches[0]->features.size());
  Mat m(static_cast<int>(patches.size()), dim);
  for (size_t i = 0; i < patches.size(); ++i) {
    if (static_cast<int>(patches[i]->features.size()) != dim)
      throw std::invalid_argument("features_of: inconsistent feature dimensions");
    for (int j = 0; j < dim; ++j)
      m.at(static_cast<int>(i), j) = patches[i]->features[static_cast<size_t>(j)];
  }
  return m;
}

Mat bag_features(const Bag& bag) {
  std::vector<const Patch*> ptrs;
  ptrs.reserve(bag.patches.size());
  for (const Patch& p : bag.patches) ptrs.push_back(&p);
  return features_of(ptrs);
}

BalancedSampler::BalancedSampler(const std::vector<Bag>& bags, uint64_t seed)
    : rng_(seed) {
  for (const Bag& bag : bags)
    for (const Patch& p : bag.patches)
      (p.slide_label == 1 ? pos_ : neg_).push_back(&p);
  if (pos_.empty() || neg_.empty())
    throw std::invalid_argument("sampler: both slide classes must be present");
  epoch_len_ = std::min(pos_.size(), neg_.size());
  pos_order_.resize(pos_.size());
  neg_order_.resize(neg_.size());
  reshuffle();
}

void BalancedSampler::reshuffle() {
  for (size_t i = 0; i < pos_order_.size(); ++i) pos_order_[i] = i;
  for (size_t i = 0; i < neg_order_.size(); ++i) neg_order_[i] = i;
  rng_.shuffle(pos_order_);
  rng_.shuffle(neg_order_);
  cursor_ = 0;
}

int BalancedSampler::steps_per_epoch(int batch_size) const {
  if (batch_size <= 0 || batch_size % 2 != 0)
    throw std::invalid_argument("sampler: batch_size must be positive and even");
  return static_cast<int>(epoch_len_ / (static_cast<size_t>(batch_size) / 2));
}

std::vector<const Patch*> BalancedSampler::next_batch(int batch_size) {
  if (batch_size <= 0 || batch_size % 2 != 0)
    throw std::invalid_argument("sampler: batch_size must be positive and even");
  const size_t half = static_cast<size_t>(batch_size) / 2;
  if (half > epoch_len_)
    throw std::invalid_argument("sampler: batch larger than the epoch pool");
  if (cursor_ + half > epoch_len_) reshuffle();
  std::vector<const Patch*> batch;
  batch.reserve(2 * half);
  for (size_t i = 0; i < half; ++i) batch.push_back(pos_[pos_order_[cursor_ + i]]);
  for (size_t i = 0; i < half; ++i) batch.push_back(neg_[neg_order_[cursor_ + i]]);
  cursor_ += half;
  return batch;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

[[noreturn]] void row_error(size_t line_no, const std::string& what) {
  throw std::runtime_error("csv line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

int parse_int(const std::string& s, size_t line_no, const char* field) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    row_error(line_no, std::string("bad integer in ") + field + ": '" + s + "'");
  return v;
}

double parse_double(const std::string& s, size_t line_no, const char* field) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    row_error(line_no, std::string("bad float in ") + field + ": '" + s + "'");
  return v;
}

}  // namespace

void save_bags_csv(const std::string& path, const std::vector<Bag>& bags) {
  int dim = -1;
  for (const Bag& bag : bags)
    for (const Patch& p : bag.patches) {
      dim = static_cast<int>(p.features.size());
      break;
    }
  if (dim < 0) throw std::invalid_argument("save_bags_csv: no patches to write");

  std::string out = "bag_id,slide_label,instance_label,subtype";
  for (int j = 0; j < dim; ++j) out += ",f" + std::to_string(j);
  out += "\n";
  for (size_t b = 0; b < bags.size(); ++b) {
    for (const Patch& p : bags[b].patches) {
      if (static_cast<int>(p.features.size()) != dim)
        throw std::invalid_argument("save_bags_csv: inconsistent feature dimensions");
      out += std::to_string(b);
      out += ',';
      out += std::to_string(p.slide_label);
      out += ',';
      out += std::to_string(p.instance_label);
      out += ',';
      out += std::to_string(p.subtype);
      for (int j = 0; j < dim; ++j) {
        out += ',';
        append_double(out, p.features[static_cast<size_t>(j)]);
      }
      out += '\n';
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_bags_csv: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("save_bags_csv: write failed for " + path);
}

std::vector<PoolRow> load_csv_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_csv_dataset: cannot open " + path);

  std::string line;
  size_t line_no = 0;
  if (!std::getline(f, line)) return {};  // empty file -> empty pool
  ++line_no;
  const std::vector<std::string> header = split_csv(line);
  if (header.size() < 5 || header[0] != "bag_id" || header[1] != "slide_label" ||
      header[2] != "instance_label" || header[3] != "subtype")
    row_error(line_no, "bad header; expected bag_id,slide_label,instance_label,subtype,f0..");
  const int dim = static_cast<int>(header.size()) - 4;
  for (int j = 0; j < dim; ++j)
    if (header[static_cast<size_t>(4 + j)] != "f" + std::to_string(j))
      row_error(line_no, "bad feature column name at position " + std::to_string(4 + j));

  std::vector<PoolRow> rows;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv(line);
    if (static_cast<int>(fields.size()) != 4 + dim)
      row_error(line_no, "expected " + std::to_string(4 + dim) + " fields, got " +
                             std::to_string(fields.size()));
    PoolRow row;
    row.bag_id = parse_int(fields[0], line_no, "bag_id");
    row.patch.slide_label = parse_int(fields[1], line_no, "slide_label");
    row.patch.instance_label = parse_int(fields[2], line_no, "instance_label");
    row.patch.subtype = parse_int(fields[3], line_no, "subtype");
    if (row.patch.slide_label != 0 && row.patch.slide_label != 1)
      row_error(line_no, "slide_label must be 0 or 1");
    if (row.patch.instance_label != 0 && row.patch.instance_label != 1)
      row_error(line_no, "instance_label must be 0 or 1");
    if (row.patch.subtype < 0) row_error(line_no, "subtype must be non-negative");
    if ((row.patch.instance_label == 0) != (row.patch.subtype == 0))
      row_error(line_no, "subtype 0 must pair with instance_label 0 and vice versa");
    if (row.patch.slide_label == 0 && row.patch.instance_label == 1)
      row_error(line_no, "negative slide cannot contain an abnormal instance");
    row.patch.features.resize(static_cast<size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      const double v = parse_double(fields[static_cast<size_t>(4 + j)], line_no,
                                    header[static_cast<size_t>(4 + j)].c_str());
      if (!std::isfinite(v)) row_error(line_no, "non-finite feature value");
      row.patch.features[static_cast<size_t>(j)] = v;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Bag> bags_from_pool(const std::vector<PoolRow>& rows) {
  std::vector<Bag> bags;
  std::set<int> seen;
  for (size_t i = 0; i < rows.size(); ++i) {
    const bool new_bag = i == 0 || rows[i].bag_id != rows[i - 1].bag_id;
    if (new_bag) {
      if (!seen.insert(rows[i].bag_id).second)
        throw std::runtime_error("bags_from_pool: rows of bag " +
                                 std::to_string(rows[i].bag_id) + " are not contiguous");
      bags.emplace_back();
    }
    Bag& bag = bags.back();
    if (!bag.patches.empty() && bag.patches.back().slide_label != rows[i].patch.slide_label)
      throw std::runtime_error("bags_from_pool: bag " + std::to_string(rows[i].bag_id) +
                               " mixes slide labels");
    bag.patches.push_back(rows[i].patch);
  }
  for (Bag& bag : bags) {
    bag.bag_label = bag.patches.front().slide_label;
    bag.witness_count = 0;
    for (const Patch& p : bag.patches) bag.witness_count += p.instance_label;
    if ((bag.bag_label == 1) != (bag.witness_count >= 1))
      throw std::runtime_error("bags_from_pool: bag label disagrees with witness count");
  }
  return bags;
}

}  // namespace slamags
