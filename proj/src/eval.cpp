#include "slamags/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace slamags {

double f1_score(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty()) throw std::invalid_argument("f1_score: empty input");
  if (predictions.size() != labels.size())
    throw std::invalid_argument("f1_score: predictions and labels differ in length");
  int tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1))
      throw std::invalid_argument("f1_score: entries must be 0 or 1");
    tp += p == 1 && y == 1;
    fp += p == 1 && y == 0;
    fn += p == 0 && y == 1;
  }
  if (tp + fp + fn == 0) return 1.0;  // all-negative and correct everywhere
  if (tp == 0) return 0.0;            // covers "positives predicted, none exist"
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

double recall_at_k(const std::vector<int>& ranking,
                   const std::vector<int>& instance_labels, int k) {
  const size_t n = instance_labels.size();
  if (ranking.size() != n)
    throw std::invalid_argument("recall_at_k: ranking and labels differ in length");
  if (k < 0 || static_cast<size_t>(k) > n)
    throw std::invalid_argument("recall_at_k: k outside [0, bag size]");
  std::vector<char> seen(n, 0);
  int keys = 0;
  for (int label : instance_labels) {
    if (label != 0 && label != 1)
      throw std::invalid_argument("recall_at_k: labels must be 0 or 1");
    keys += label;
  }
  if (keys == 0)
    throw std::invalid_argument("recall_at_k: undefined for a bag without key instances");
  int hit = 0;
  for (int i = 0; i < k; ++i) {
    const int idx = ranking[static_cast<size_t>(i)];
    if (idx < 0 || static_cast<size_t>(idx) >= n || seen[static_cast<size_t>(idx)])
      throw std::invalid_argument("recall_at_k: ranking is not a permutation prefix");
    seen[static_cast<size_t>(idx)] = 1;
    hit += instance_labels[static_cast<size_t>(idx)];
  }
  return static_cast<double>(hit) / static_cast<double>(keys);
}

int k_for(int bag_size) {
  if (bag_size <= 0) throw std::invalid_argument("k_for: bag_size must be positive");
  return static_cast<int>(std::llround(0.4 * bag_size));
}

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments sample_moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return m;
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

void append_fixed6(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  out += buf;
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

[[noreturn]] void row_error(size_t line_no, const std::string& what) {
  throw std::runtime_error("results line " + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& s, size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    row_error(line_no, "bad float '" + s + "'");
  return v;
}

long long parse_ll(const std::string& s, size_t line_no) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    row_error(line_no, "bad integer '" + s + "'");
  return v;
}

}  // namespace

std::vector<AggregateRecord> aggregate(const std::vector<MetricsRecord>& records) {
  std::vector<AggregateRecord> out;
  std::vector<std::vector<const MetricsRecord*>> groups;
  for (const MetricsRecord& r : records) {
    bool placed = false;
    for (size_t g = 0; g < out.size(); ++g) {
      if (out[g].method == r.method && out[g].witness_rate == r.witness_rate) {
        groups[g].push_back(&r);
        placed = true;
        break;
      }
    }
    if (!placed) {
      AggregateRecord a;
      a.method = r.method;
      a.witness_rate = r.witness_rate;
      out.push_back(a);
      groups.push_back({&r});
    }
  }
  for (size_t g = 0; g < out.size(); ++g) {
    std::vector<double> f1s, recalls;
    for (const MetricsRecord* r : groups[g]) {
      f1s.push_back(r->f1);
      recalls.push_back(r->recall_at_k);
      if (r->k != groups[g].front()->k)
        throw std::invalid_argument("aggregate: inconsistent k within a cell");
    }
    const Moments f1m = sample_moments(f1s);
    const Moments rm = sample_moments(recalls);
    out[g].f1_mean = f1m.mean;
    out[g].f1_std = f1m.std;
    out[g].recall_mean = rm.mean;
    out[g].recall_std = rm.std;
    out[g].k = groups[g].front()->k;
    out[g].n_seeds = static_cast<int>(groups[g].size());
  }
  return out;
}

void save_results_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
  std::string out = "method,witness_rate,seed,f1,recall_at_k,k\n";
  for (const MetricsRecord& r : records) {
    out += r.method;
    out += ',';
    append_double(out, r.witness_rate);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    append_double(out, r.f1);
    out += ',';
    append_double(out, r.recall_at_k);
    out += ',';
    out += std::to_string(r.k);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_results_csv: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("save_results_csv: write failed for " + path);
}

std::vector<MetricsRecord> load_results_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_results_csv: cannot open " + path);
  std::string line;
  size_t line_no = 0;
  if (!std::getline(f, line)) return {};
  ++line_no;
  if (split_csv(line) !=
      std::vector<std::string>{"method", "witness_rate", "seed", "f1", "recall_at_k", "k"})
    row_error(line_no, "bad header");
  std::vector<MetricsRecord> records;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != 6) row_error(line_no, "expected 6 fields");
    MetricsRecord r;
    r.method = fields[0];
    if (r.method.empty()) row_error(line_no, "empty method");
    r.witness_rate = parse_double(fields[1], line_no);
    r.seed = static_cast<uint64_t>(parse_ll(fields[2], line_no));
    r.f1 = parse_double(fields[3], line_no);
    r.recall_at_k = parse_double(fields[4], line_no);
    r.k = static_cast<int>(parse_ll(fields[5], line_no));
    records.push_back(std::move(r));
  }
  return records;
}

void save_aggregate_csv(const std::string& path, const std::vector<AggregateRecord>& records) {
  std::string out = "method,witness_rate,f1_mean,f1_std,recall_mean,recall_std,k,n_seeds\n";
  for (const AggregateRecord& r : records) {
    out += r.method;
    out += ',';
    append_fixed6(out, r.witness_rate);
    out += ',';
    append_fixed6(out, r.f1_mean);
    out += ',';
    append_fixed6(out, r.f1_std);
    out += ',';
    append_fixed6(out, r.recall_mean);
    out += ',';
    append_fixed6(out, r.recall_std);
    out += ',';
    out += std::to_string(r.k);
    out += ',';
    out += std::to_string(r.n_seeds);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_aggregate_csv: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("save_aggregate_csv: write failed for " + path);
}

}  // namespace slamags
