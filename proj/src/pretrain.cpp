#include "slamags/pretrain.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "slamags/autodiff.hpp"
#include "slamags/flat.hpp"
#include "slamags/losses.hpp"

namespace slamags {

Method method_from_string(const std::string& name) {
  if (name == "weakly_supervised") return Method::WeaklySupervised;
  if (name == "simclr") return Method::SimClr;
  if (name == "weaksupcon") return Method::WeakSupCon;
  if (name == "slam_ags_no_rescale") return Method::SlamAgsNoRescale;
  if (name == "slam_ags") return Method::SlamAgs;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::WeaklySupervised: return "weakly_supervised";
    case Method::SimClr: return "simclr";
    case Method::WeakSupCon: return "weaksupcon";
    case Method::SlamAgsNoRescale: return "slam_ags_no_rescale";
    case Method::SlamAgs: return "slam_ags";
  }
  throw std::invalid_argument("unknown method enum value");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {
      Method::WeaklySupervised, Method::SimClr, Method::WeakSupCon,
      Method::SlamAgsNoRescale, Method::SlamAgs};
  return methods;
}

void PretrainConfig::validate() const {
  encoder.validate();
  augment.validate();
  if (tau_sim <= 0.0 || tau_ntxent <= 0.0)
    throw std::invalid_argument("pretrain: temperatures must be positive");
  if (epochs <= 0) throw std::invalid_argument("pretrain: epochs must be positive");
  if (batch_size < 2 || batch_size % 2 != 0)
    throw std::invalid_argument("pretrain: batch_size must be even and at least 2");
  if (base_lr <= 0.0) throw std::invalid_argument("pretrain: base_lr must be positive");
  if (final_lr < 0.0) throw std::invalid_argument("pretrain: final_lr must be non-negative");
  if (warmup_epochs < 0 || warmup_epochs >= epochs)
    throw std::invalid_argument("pretrain: warmup_epochs must lie in [0, epochs)");
}

namespace {

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Epoch-permutation sampler over the whole pool, label-blind (view-contrastive
// pretraining must not touch the weak labels).
class PoolSampler {
 public:
  PoolSampler(const std::vector<Bag>& bags, uint64_t seed)
      : pool_(patch_pool(bags)), rng_(seed) {
    if (pool_.empty()) throw std::invalid_argument("sampler: empty corpus");
    order_.resize(pool_.size());
    reshuffle();
  }

  int steps_per_epoch(int batch_size) const {
    return static_cast<int>(pool_.size() / static_cast<size_t>(batch_size));
  }

  std::vector<const Patch*> next_batch(int batch_size) {
    const size_t b = static_cast<size_t>(batch_size);
    if (b > pool_.size())
      throw std::invalid_argument("sampler: batch larger than the patch pool");
    if (cursor_ + b > pool_.size()) reshuffle();
    std::vector<const Patch*> batch;
    batch.reserve(b);
    for (size_t i = 0; i < b; ++i) batch.push_back(pool_[order_[cursor_ + i]]);
    cursor_ += b;
    return batch;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), size_t{0});
    rng_.shuffle(order_);
    cursor_ = 0;
  }

  std::vector<const Patch*> pool_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
  Rng rng_;
};

Mat two_view_mat(const std::vector<const Patch*>& patches, const AugmentConfig& config,
                 Rng& rng) {
  if (patches.empty()) return Mat(0, 0);
  const int dim = static_cast<int>(patches[0]->features.size());
  Mat m(2 * static_cast<int>(patches.size()), dim);
  for (size_t i = 0; i < patches.size(); ++i) {
    const auto [a, b] = augment(patches[i]->features, config, rng);
    for (int j = 0; j < dim; ++j) {
      m.at(static_cast<int>(2 * i), j) = a[static_cast<size_t>(j)];
      m.at(static_cast<int>(2 * i + 1), j) = b[static_cast<size_t>(j)];
    }
  }
  return m;
}

Mat one_view_mat(const std::vector<const Patch*>& patches, const AugmentConfig& config,
                 Rng& rng) {
  if (patches.empty()) return Mat(0, 0);
  const int dim = static_cast<int>(patches[0]->features.size());
  Mat m(static_cast<int>(patches.size()), dim);
  for (size_t i = 0; i < patches.size(); ++i) {
    const std::vector<double> view = augment(patches[i]->features, config, rng).first;
    for (int j = 0; j < dim; ++j) m.at(static_cast<int>(i), j) = view[static_cast<size_t>(j)];
  }
  return m;
}

Mat glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Mat m(fan_in, fan_out);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

CombineStrategy strategy_for(Method method) {
  switch (method) {
    case Method::WeakSupCon: return CombineStrategy::Sum;
    case Method::SlamAgsNoRescale: return CombineStrategy::PcGrad;
    case Method::SlamAgs: return CombineStrategy::PcGradRescaled;
    default: throw std::logic_error("strategy_for: single-task method");
  }
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

}  // namespace

PretrainResult pretrain(Method method, const std::vector<Bag>& train_bags,
                        const PretrainConfig& config, uint64_t seed) {
  config.validate();

  EncoderParams params =
      init_encoder(config.encoder, derive_seed(seed, Stream::EncoderInit));
  const bool needs_labels = method != Method::SimClr;
  const bool uses_head = method == Method::WeaklySupervised;

  // The label-using methods draw class-balanced batches; plain
  // view-contrastive pretraining samples the pool label-blind.
  std::unique_ptr<BalancedSampler> balanced;
  std::unique_ptr<PoolSampler> uniform;
  int steps_per_epoch = 0;
  if (needs_labels) {
    balanced = std::make_unique<BalancedSampler>(train_bags,
                                                 derive_seed(seed, Stream::Sampler));
    steps_per_epoch = balanced->steps_per_epoch(config.batch_size);
  } else {
    uniform = std::make_unique<PoolSampler>(train_bags,
                                            derive_seed(seed, Stream::Sampler));
    steps_per_epoch = uniform->steps_per_epoch(config.batch_size);
  }
  if (steps_per_epoch < 1)
    throw std::invalid_argument("pretrain: corpus too small for one batch per epoch");

  Mat head_w, head_b;
  if (uses_head) {
    Rng head_rng(derive_seed(seed, Stream::HeadInit));
    head_w = glorot_uniform(config.encoder.feat_dim, 2, head_rng);
    head_b = Mat(1, 2);
  }

  ScheduleConfig schedule;
  schedule.base_lr = config.base_lr;
  schedule.warmup_epochs = config.warmup_epochs;
  schedule.total_epochs = config.epochs;
  schedule.steps_per_epoch = steps_per_epoch;
  schedule.final_lr = config.final_lr;

  const size_t encoder_size = total_size(std::as_const(params).tensors());
  const size_t param_size = encoder_size + (uses_head ? head_w.size() + head_b.size() : 0);
  OptimizerState opt = OptimizerState::make(config.optimizer, param_size);
  Rng aug_rng(derive_seed(seed, Stream::Augment));

  PretrainRunLog log;
  log.steps.reserve(static_cast<size_t>(config.epochs) * static_cast<size_t>(steps_per_epoch));

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int s = 0; s < steps_per_epoch; ++s, ++step) {
      StepRecord rec;
      rec.step = step;
      rec.lr = lr_at(step, schedule);

      std::vector<double> flat_params = flatten(std::as_const(params).tensors());
      if (uses_head) {
        flat_params.insert(flat_params.end(), head_w.data.begin(), head_w.data.end());
        flat_params.insert(flat_params.end(), head_b.data.begin(), head_b.data.end());
      }
      std::vector<double> grad;

      if (method == Method::WeaklySupervised) {
        const std::vector<const Patch*> batch = balanced->next_batch(config.batch_size);
        const Mat views = one_view_mat(batch, config.augment, aug_rng);
        std::vector<int> labels;
        labels.reserve(batch.size());
        for (const Patch* p : batch) labels.push_back(p->slide_label);

        Tape tape;
        const EncoderForward fwd = encoder_forward(tape, params, views);
        const Tensor wh = tape.leaf(head_w, true);
        const Tensor bh = tape.leaf(head_b, true);
        const Tensor logits = tape.add_rowvec(tape.matmul(fwd.backbone, wh), bh);
        const Tensor loss = cross_entropy_loss(tape, logits, labels);
        rec.loss_total = rec.loss_task1 = loss.item();
        const GradMap grads = tape.backward(loss);
        for (const Tensor& leaf : fwd.leaves) {
          const Mat& g = grads.at(leaf);
          grad.insert(grad.end(), g.data.begin(), g.data.end());
        }
        for (const Tensor* leaf : {&wh, &bh}) {
          const Mat& g = grads.at(*leaf);
          grad.insert(grad.end(), g.data.begin(), g.data.end());
        }
        rec.gsum_norm = rec.gpc_norm = vec_norm(grad);
      } else if (method == Method::SimClr) {
        const std::vector<const Patch*> batch = uniform->next_batch(config.batch_size);
        const Mat views = two_view_mat(batch, config.augment, aug_rng);

        Tape tape;
        const EncoderForward fwd = encoder_forward(tape, params, views);
        const PretrainBatch pb{tape.constant(Mat(0, config.encoder.proj_dim)),
                               fwd.projected, config.tau_sim, config.tau_ntxent};
        const Tensor loss = ntxent_loss(tape, pb);
        rec.loss_total = rec.loss_task2 = loss.item();
        const GradMap grads = tape.backward(loss);
        for (const Tensor& leaf : fwd.leaves) {
          const Mat& g = grads.at(leaf);
          grad.insert(grad.end(), g.data.begin(), g.data.end());
        }
        rec.gsum_norm = rec.gpc_norm = vec_norm(grad);
      } else {
        const std::vector<const Patch*> batch = balanced->next_batch(config.batch_size);
        const size_t half = batch.size() / 2;
        const std::vector<const Patch*> pos(batch.begin(),
                                            batch.begin() + static_cast<std::ptrdiff_t>(half));
        const std::vector<const Patch*> neg(batch.begin() + static_cast<std::ptrdiff_t>(half),
                                            batch.end());
        // Augmentation consumes the stream in batch order: positives first.
        const Mat pos_views = two_view_mat(pos, config.augment, aug_rng);
        const Mat neg_views = two_view_mat(neg, config.augment, aug_rng);

        const TaskGradients tg = extract_task_gradients(params, neg_views, pos_views,
                                                        config.tau_sim, config.tau_ntxent);
        SurgeryDiagnostics diag;
        grad = combine(tg.g1, tg.g2, strategy_for(method), &diag);
        rec.loss_task1 = tg.l_sim;
        rec.loss_task2 = tg.l_simclr;
        rec.loss_total = tg.l_sim + tg.l_simclr;
        rec.conflict = diag.conflicted;
        rec.g1_norm = diag.g1_norm;
        rec.g2_norm = diag.g2_norm;
        rec.gsum_norm = diag.gsum_norm;
        rec.gpc_norm = diag.gpc_norm;
        rec.rescale_factor = diag.rescale_factor;
      }

      if (!std::isfinite(rec.loss_total))
        throw std::runtime_error("pretrain: non-finite loss at step " + std::to_string(step));

      const std::vector<double> updated = apply_update(flat_params, grad, opt, rec.lr);
      const std::vector<double> enc_flat(updated.begin(),
                                         updated.begin() + static_cast<std::ptrdiff_t>(encoder_size));
      unflatten(enc_flat, params.tensors());
      if (uses_head) {
        size_t pos_idx = encoder_size;
        for (double& v : head_w.data) v = updated[pos_idx++];
        for (double& v : head_b.data) v = updated[pos_idx++];
      }
      log.steps.push_back(rec);
    }
  }
  return PretrainResult{std::move(params), std::move(log)};
}

void save_run_log_csv(const std::string& path, const PretrainRunLog& log) {
  std::string out =
      "step,lr,loss_total,loss_task1,loss_task2,conflict,g1_norm,g2_norm,"
      "gsum_norm,gpc_norm,rescale_factor\n";
  for (const StepRecord& r : log.steps) {
    out += std::to_string(r.step);
    out += ',';
    append_double(out, r.lr);
    out += ',';
    append_double(out, r.loss_total);
    out += ',';
    append_double(out, r.loss_task1);
    out += ',';
    append_double(out, r.loss_task2);
    out += ',';
    out += r.conflict ? '1' : '0';
    out += ',';
    append_double(out, r.g1_norm);
    out += ',';
    append_double(out, r.g2_norm);
    out += ',';
    append_double(out, r.gsum_norm);
    out += ',';
    append_double(out, r.gpc_norm);
    out += ',';
    append_double(out, r.rescale_factor);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_run_log_csv: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("save_run_log_csv: write failed for " + path);
}

namespace {

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

double parse_double_at(const std::string& s, size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("run log line " + std::to_string(line_no) + ": bad float '" +
                             s + "'");
  return v;
}

}  // namespace

PretrainRunLog load_run_log_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_run_log_csv: cannot open " + path);
  std::string line;
  size_t line_no = 0;
  if (!std::getline(f, line))
    throw std::runtime_error("load_run_log_csv: empty file " + path);
  ++line_no;
  PretrainRunLog log;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != 11)
      throw std::runtime_error("run log line " + std::to_string(line_no) +
                               ": expected 11 fields");
    StepRecord r;
    r.step = static_cast<int>(parse_double_at(fields[0], line_no));
    r.lr = parse_double_at(fields[1], line_no);
    r.loss_total = parse_double_at(fields[2], line_no);
    r.loss_task1 = parse_double_at(fields[3], line_no);
    r.loss_task2 = parse_double_at(fields[4], line_no);
    r.conflict = fields[5] == "1";
    r.g1_norm = parse_double_at(fields[6], line_no);
    r.g2_norm = parse_double_at(fields[7], line_no);
    r.gsum_norm = parse_double_at(fields[8], line_no);
    r.gpc_norm = parse_double_at(fields[9], line_no);
    r.rescale_factor = parse_double_at(fields[10], line_no);
    log.steps.push_back(r);
  }
  return log;
}

}  // namespace slamags
