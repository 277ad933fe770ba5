#include "slamags/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace slamags {

namespace {

void check_finite(const Mat& m, const char* op) {
  if (!m.all_finite())
    throw std::runtime_error(std::string(op) + ": non-finite value in forward result");
}

std::string shape_str(int r, int c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a.rows(), a.cols()) + " vs " +
                              shape_str(b.rows(), b.cols()));
}

// grads[id] is lazily allocated; empty means the node was not reached yet.
Mat& grad_slot(std::vector<Mat>& grads, int id, int rows, int cols) {
  Mat& g = grads[static_cast<size_t>(id)];
  if (g.data.empty()) g = Mat::zeros(rows, cols);
  return g;
}

}  // namespace

double Tensor::item() const {
  if (rows() != 1 || cols() != 1)
    throw std::invalid_argument("Tensor::item: tensor is not 1x1");
  return value_->data[0];
}

const Mat& GradMap::at(int node_id) const {
  auto it = grads_.find(node_id);
  if (it == grads_.end())
    throw std::invalid_argument("GradMap::at: node " + std::to_string(node_id) +
                                " is not a requires_grad leaf of this backward pass");
  return it->second;
}

void Tape::check_same_tape(const Tensor& t, const char* op) const {
  if (t.tape_ != this)
    throw std::invalid_argument(std::string(op) + ": tensor belongs to a different tape");
}

Tensor Tape::record(Mat value, bool requires_grad, BackwardFn backward, const char* op) {
  check_finite(value, op);
  Node node;
  node.rows = value.rows;
  node.cols = value.cols;
  node.requires_grad = requires_grad;
  node.is_leaf = !backward;
  node.value = std::make_shared<const Mat>(std::move(value));
  if (requires_grad) node.backward = std::move(backward);
  const int id = static_cast<int>(nodes_.size());
  auto vptr = node.value;
  nodes_.push_back(std::move(node));
  return Tensor(this, id, std::move(vptr), requires_grad);
}

Tensor Tape::leaf(Mat value, bool requires_grad) {
  if (value.rows < 0 || value.cols < 0 ||
      value.data.size() != static_cast<size_t>(value.rows) * value.cols)
    throw std::invalid_argument("leaf: data length does not match shape");
  return record(std::move(value), requires_grad, nullptr, "leaf");
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, "matmul");
  check_same_tape(b, "matmul");
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (m == 0 || k == 0 || n == 0)
    throw std::invalid_argument("matmul: empty operand");

  Mat out(m, n);
  {
    const double* pa = a.value().data.data();
    const double* pb = b.value().data.data();
    double* po = out.data.data();
    for (int i = 0; i < m; ++i) {
      for (int kk = 0; kk < k; ++kk) {
        const double av = pa[static_cast<size_t>(i) * k + kk];
        const double* brow = pb + static_cast<size_t>(kk) * n;
        double* orow = po + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }

  const bool rg = a.requires_grad() || b.requires_grad();
  auto av = a.value_;
  auto bv = b.value_;
  const int aid = a.id_, bid = b.id_;
  const bool arg = a.requires_grad(), brg = b.requires_grad();
  return record(
      std::move(out), rg,
      [=](const Mat& gout, std::vector<Mat>& grads) {
        const double* pg = gout.data.data();
        if (arg) {
          // dA[i,kk] += sum_j gout[i,j] * B[kk,j]
          Mat& ga = grad_slot(grads, aid, m, k);
          const double* pb = bv->data.data();
          for (int i = 0; i < m; ++i) {
            const double* grow = pg + static_cast<size_t>(i) * n;
            double* garow = ga.data.data() + static_cast<size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
              const double* brow = pb + static_cast<size_t>(kk) * n;
              double s = 0.0;
              for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
              garow[kk] += s;
            }
          }
        }
        if (brg) {
          // dB[kk,j] += sum_i A[i,kk] * gout[i,j]
          Mat& gb = grad_slot(grads, bid, k, n);
          const double* pa = av->data.data();
          for (int i = 0; i < m; ++i) {
            const double* arow = pa + static_cast<size_t>(i) * k;
            const double* grow = pg + static_cast<size_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
              const double aik = arow[kk];
              if (aik == 0.0) continue;
              double* gbrow = gb.data.data() + static_cast<size_t>(kk) * n;
              for (int j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
            }
          }
        }
      },
      "matmul");
}

Tensor Tape::transpose(const Tensor& a) {
  check_same_tape(a, "transpose");
  const int m = a.rows(), n = a.cols();
  Mat out(n, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.value().at(i, j);
  const int aid = a.id_;
  return record(
      std::move(out), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        Mat& ga = grad_slot(grads, aid, m, n);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) ga.at(i, j) += gout.at(j, i);
      },
      "transpose");
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  check_same_tape(a, "add");
  check_same_tape(b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
  Mat out = a.value();
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.value().data[i];
  const int aid = a.id_, bid = b.id_;
  const bool arg = a.requires_grad(), brg = b.requires_grad();
  const int m = a.rows(), n = a.cols();
  return record(
      std::move(out), arg || brg,
      [=](const Mat& gout, std::vector<Mat>& grads) {
        if (arg) {
          Mat& ga = grad_slot(grads, aid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i) ga.data[i] += gout.data[i];
        }
        if (brg) {
          Mat& gb = grad_slot(grads, bid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i) gb.data[i] += gout.data[i];
        }
      },
      "add");
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  check_same_tape(a, "sub");
  check_same_tape(b, "sub");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a, b);
  Mat out = a.value();
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
  const int aid = a.id_, bid = b.id_;
  const bool arg = a.requires_grad(), brg = b.requires_grad();
  const int m = a.rows(), n = a.cols();
  return record(
      std::move(out), arg || brg,
      [=](const Mat& gout, std::vector<Mat>& grads) {
        if (arg) {
          Mat& ga = grad_slot(grads, aid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i) ga.data[i] += gout.data[i];
        }
        if (brg) {
          Mat& gb = grad_slot(grads, bid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i) gb.data[i] -= gout.data[i];
        }
      },
      "sub");
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, "mul");
  check_same_tape(b, "mul");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
  Mat out = a.value();
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
  const int aid = a.id_, bid = b.id_;
  const bool arg = a.requires_grad(), brg = b.requires_grad();
  const int m = a.rows(), n = a.cols();
  auto av = a.value_;
  auto bv = b.value_;
  return record(
      std::move(out), arg || brg,
      [=](const Mat& gout, std::vector<Mat>& grads) {
        if (arg) {
          Mat& ga = grad_slot(grads, aid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i)
            ga.data[i] += gout.data[i] * bv->data[i];
        }
        if (brg) {
          Mat& gb = grad_slot(grads, bid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i)
            gb.data[i] += gout.data[i] * av->data[i];
        }
      },
      "mul");
}

Tensor Tape::scalar_mul(const Tensor& a, double c) {
  check_same_tape(a, "scalar_mul");
  Mat out = a.value();
  for (double& v : out.data) v *= c;
  const int aid = a.id_;
  const int m = a.rows(), n = a.cols();
  return record(
      std::move(out), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        Mat& ga = grad_slot(grads, aid, m, n);
        for (size_t i = 0; i < gout.data.size(); ++i) ga.data[i] += c * gout.data[i];
      },
      "scalar_mul");
}

Tensor Tape::unary_elementwise(const Tensor& a, const char* op,
                               double (*fwd)(double), double (*dfdx)(double, double)) {
  check_same_tape(a, op);
  Mat out = a.value();
  for (double& v : out.data) v = fwd(v);
  const int aid = a.id_;
  const int m = a.rows(), n = a.cols();
  auto av = a.value_;
  auto ov = std::make_shared<Mat>(out);  // shares computed values with the closure
  return record(
      std::move(out), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        Mat& ga = grad_slot(grads, aid, m, n);
        for (size_t i = 0; i < gout.data.size(); ++i)
          ga.data[i] += gout.data[i] * dfdx(av->data[i], ov->data[i]);
      },
      op);
}

Tensor Tape::exp(const Tensor& a) {
  return unary_elementwise(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor Tape::log(const Tensor& a) {
  check_same_tape(a, "log");
  for (double v : a.value().data)
    if (v <= 0.0) throw std::invalid_argument("log: non-positive input");
  return unary_elementwise(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor Tape::tanh(const Tensor& a) {
  return unary_elementwise(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Tape::sigmoid(const Tensor& a) {
  return unary_elementwise(
      a, "sigmoid",
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                     : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Tape::relu(const Tensor& a) {
  return unary_elementwise(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& v) {
  check_same_tape(a, "add_rowvec");
  check_same_tape(v, "add_rowvec");
  if (v.rows() != 1 || v.cols() != a.cols()) shape_error("add_rowvec", a, v);
  const int m = a.rows(), n = a.cols();
  Mat out = a.value();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += v.value().data[static_cast<size_t>(j)];
  const int aid = a.id_, vid = v.id_;
  const bool arg = a.requires_grad(), vrg = v.requires_grad();
  return record(
      std::move(out), arg || vrg,
      [=](const Mat& gout, std::vector<Mat>& grads) {
        if (arg) {
          Mat& ga = grad_slot(grads, aid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i) ga.data[i] += gout.data[i];
        }
        if (vrg) {
          Mat& gv = grad_slot(grads, vid, 1, n);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) gv.data[static_cast<size_t>(j)] += gout.at(i, j);
        }
      },
      "add_rowvec");
}

Tensor Tape::sub_colvec(const Tensor& a, const Tensor& v) {
  check_same_tape(a, "sub_colvec");
  check_same_tape(v, "sub_colvec");
  if (v.cols() != 1 || v.rows() != a.rows()) shape_error("sub_colvec", a, v);
  const int m = a.rows(), n = a.cols();
  Mat out = a.value();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) -= v.value().data[static_cast<size_t>(i)];
  const int aid = a.id_, vid = v.id_;
  const bool arg = a.requires_grad(), vrg = v.requires_grad();
  return record(
      std::move(out), arg || vrg,
      [=](const Mat& gout, std::vector<Mat>& grads) {
        if (arg) {
          Mat& ga = grad_slot(grads, aid, m, n);
          for (size_t i = 0; i < gout.data.size(); ++i) ga.data[i] += gout.data[i];
        }
        if (vrg) {
          Mat& gv = grad_slot(grads, vid, m, 1);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) gv.data[static_cast<size_t>(i)] -= gout.at(i, j);
        }
      },
      "sub_colvec");
}

Tensor Tape::sum_all(const Tensor& a) {
  check_same_tape(a, "sum_all");
  if (a.value().data.empty()) throw std::invalid_argument("sum_all: empty reduction");
  double s = 0.0;
  for (double v : a.value().data) s += v;
  const int aid = a.id_;
  const int m = a.rows(), n = a.cols();
  return record(
      Mat(1, 1, {s}), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        Mat& ga = grad_slot(grads, aid, m, n);
        for (double& v : ga.data) v += gout.data[0];
      },
      "sum_all");
}

Tensor Tape::mean_all(const Tensor& a) {
  check_same_tape(a, "mean_all");
  if (a.value().data.empty()) throw std::invalid_argument("mean_all: empty reduction");
  return scalar_mul(sum_all(a), 1.0 / static_cast<double>(a.value().data.size()));
}

Tensor Tape::max_all(const Tensor& a) {
  check_same_tape(a, "max_all");
  if (a.value().data.empty()) throw std::invalid_argument("max_all: empty reduction");
  size_t arg = 0;
  double best = a.value().data[0];
  for (size_t i = 1; i < a.value().data.size(); ++i)
    if (a.value().data[i] > best) {  // strict: ties keep the first occurrence
      best = a.value().data[i];
      arg = i;
    }
  const int aid = a.id_;
  const int m = a.rows(), n = a.cols();
  return record(
      Mat(1, 1, {best}), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        Mat& ga = grad_slot(grads, aid, m, n);
        ga.data[arg] += gout.data[0];
      },
      "max_all");
}

Tensor Tape::sum_axis(const Tensor& a, Axis axis) {
  check_same_tape(a, "sum_axis");
  const int m = a.rows(), n = a.cols();
  if (m == 0 || n == 0) throw std::invalid_argument("sum_axis: empty reduction");
  const int aid = a.id_;
  if (axis == Axis::Rows) {
    Mat out(1, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(j)] += a.value().at(i, j);
    return record(
        std::move(out), a.requires_grad(),
        [=](const Mat& gout, std::vector<Mat>& grads) {
          Mat& ga = grad_slot(grads, aid, m, n);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ga.at(i, j) += gout.data[static_cast<size_t>(j)];
        },
        "sum_axis");
  }
  Mat out(m, 1);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(i)] += a.value().at(i, j);
  return record(
      std::move(out), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        Mat& ga = grad_slot(grads, aid, m, n);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) ga.at(i, j) += gout.data[static_cast<size_t>(i)];
      },
      "sum_axis");
}

Tensor Tape::mean_axis(const Tensor& a, Axis axis) {
  const double count = axis == Axis::Rows ? a.rows() : a.cols();
  if (count == 0) throw std::invalid_argument("mean_axis: empty reduction");
  return scalar_mul(sum_axis(a, axis), 1.0 / count);
}

Tensor Tape::max_axis(const Tensor& a, Axis axis) {
  check_same_tape(a, "max_axis");
  const int m = a.rows(), n = a.cols();
  if (m == 0 || n == 0) throw std::invalid_argument("max_axis: empty reduction");
  const int aid = a.id_;
  const int out_len = axis == Axis::Rows ? n : m;
  Mat out(axis == Axis::Rows ? 1 : m, axis == Axis::Rows ? n : 1);
  std::vector<int> argmax(static_cast<size_t>(out_len), 0);
  if (axis == Axis::Rows) {
    for (int j = 0; j < n; ++j) {
      double best = a.value().at(0, j);
      int arg = 0;
      for (int i = 1; i < m; ++i)
        if (a.value().at(i, j) > best) {
          best = a.value().at(i, j);
          arg = i;
        }
      out.data[static_cast<size_t>(j)] = best;
      argmax[static_cast<size_t>(j)] = arg;
    }
  } else {
    for (int i = 0; i < m; ++i) {
      double best = a.value().at(i, 0);
      int arg = 0;
      for (int j = 1; j < n; ++j)
        if (a.value().at(i, j) > best) {
          best = a.value().at(i, j);
          arg = j;
        }
      out.data[static_cast<size_t>(i)] = best;
      argmax[static_cast<size_t>(i)] = arg;
    }
  }
  return record(
      std::move(out), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        Mat& ga = grad_slot(grads, aid, m, n);
        if (axis == Axis::Rows) {
          for (int j = 0; j < n; ++j)
            ga.at(argmax[static_cast<size_t>(j)], j) += gout.data[static_cast<size_t>(j)];
        } else {
          for (int i = 0; i < m; ++i)
            ga.at(i, argmax[static_cast<size_t>(i)]) += gout.data[static_cast<size_t>(i)];
        }
      },
      "max_axis");
}

Tensor Tape::row_l2_normalize(const Tensor& a) {
  check_same_tape(a, "row_l2_normalize");
  const int m = a.rows(), n = a.cols();
  Mat out(m, n);
  std::vector<double> inv_norm(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double ss = 0.0;
    for (int j = 0; j < n; ++j) ss += a.value().at(i, j) * a.value().at(i, j);
    const double norm = std::sqrt(ss);
    if (norm < 1e-12)
      throw std::invalid_argument("row_l2_normalize: row " + std::to_string(i) +
                                  " has near-zero norm");
    inv_norm[static_cast<size_t>(i)] = 1.0 / norm;
    for (int j = 0; j < n; ++j) out.at(i, j) = a.value().at(i, j) * inv_norm[static_cast<size_t>(i)];
  }
  const int aid = a.id_;
  auto ov = std::make_shared<Mat>(out);
  return record(
      std::move(out), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        // dx_r = (g_r - y_r (g_r . y_r)) / ||x_r||
        Mat& ga = grad_slot(grads, aid, m, n);
        for (int i = 0; i < m; ++i) {
          double gy = 0.0;
          for (int j = 0; j < n; ++j) gy += gout.at(i, j) * ov->at(i, j);
          for (int j = 0; j < n; ++j)
            ga.at(i, j) += (gout.at(i, j) - ov->at(i, j) * gy) * inv_norm[static_cast<size_t>(i)];
        }
      },
      "row_l2_normalize");
}

Tensor Tape::softmax_rows(const Tensor& a) {
  check_same_tape(a, "softmax_rows");
  const int m = a.rows(), n = a.cols();
  if (n == 0) throw std::invalid_argument("softmax_rows: empty rows");
  Mat out(m, n);
  for (int i = 0; i < m; ++i) {
    double mx = a.value().at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, a.value().at(i, j));
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      const double e = std::exp(a.value().at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= denom;
  }
  const int aid = a.id_;
  auto ov = std::make_shared<Mat>(out);
  return record(
      std::move(out), a.requires_grad(),
      [=](const Mat& gout, std::vector<Mat>& grads) {
        // ds = y o (g - sum(g o y)) per row
        Mat& ga = grad_slot(grads, aid, m, n);
        for (int i = 0; i < m; ++i) {
          double gy = 0.0;
          for (int j = 0; j < n; ++j) gy += gout.at(i, j) * ov->at(i, j);
          for (int j = 0; j < n; ++j)
            ga.at(i, j) += ov->at(i, j) * (gout.at(i, j) - gy);
        }
      },
      "softmax_rows");
}

GradMap Tape::backward(const Tensor& loss) const {
  check_same_tape(loss, "backward");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");

  std::vector<Mat> grads(nodes_.size());
  grads[static_cast<size_t>(loss.id())] = Mat(1, 1, {1.0});

  // Nodes are appended in topological order, so a reverse id sweep starting
  // at the loss is a valid reverse-topological visit; each node fires once.
  for (int id = loss.id(); id >= 0; --id) {
    const Node& node = nodes_[static_cast<size_t>(id)];
    if (!node.requires_grad || !node.backward) continue;
    const Mat& g = grads[static_cast<size_t>(id)];
    if (g.data.empty()) continue;  // not reachable from the loss
    node.backward(g, grads);
  }

  GradMap out;
  for (size_t id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (!node.is_leaf || !node.requires_grad) continue;
    Mat& g = grads[id];
    if (g.data.empty()) g = Mat::zeros(node.rows, node.cols);
    out.grads_.emplace(static_cast<int>(id), std::move(g));
  }
  return out;
}

}  // namespace slamags
