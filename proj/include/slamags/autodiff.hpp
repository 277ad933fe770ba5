#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "slamags/mat.hpp"

namespace slamags {

class Tape;

// Handle to a value recorded on a tape. Immutable after creation; identity is
// the node id within its tape.
class Tensor {
 public:
  int rows() const { return value_->rows; }
  int cols() const { return value_->cols; }
  int id() const { return id_; }
  bool requires_grad() const { return requires_grad_; }
  const Mat& value() const { return *value_; }
  double item() const;  // 1x1 only

 private:
  friend class Tape;
  Tensor(const Tape* tape, int id, std::shared_ptr<const Mat> v, bool rg)
      : tape_(tape), id_(id), value_(std::move(v)), requires_grad_(rg) {}

  const Tape* tape_;
  int id_;
  std::shared_ptr<const Mat> value_;
  bool requires_grad_;
};

// Result of a backward pass: gradient per requires_grad leaf node id.
// Leaves not reachable from the loss carry zero gradients.
class GradMap {
 public:
  const Mat& at(const Tensor& leaf) const { return at(leaf.id()); }
  const Mat& at(int node_id) const;
  bool contains(int node_id) const { return grads_.count(node_id) != 0; }
  size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<int, Mat> grads_;
};

enum class Axis { Rows = 0, Cols = 1 };

// Define-by-run reverse-mode tape over 2-D double tensors. Nodes are appended
// in topological order (parents always precede children); a backward pass
// walks node ids in reverse and visits each node at most once. Rebuilt every
// training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Mat value, bool requires_grad);
  Tensor constant(Mat value) { return leaf(std::move(value), false); }
  Tensor scalar(double v) { return constant(Mat(1, 1, {v})); }

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
  Tensor scalar_mul(const Tensor& a, double c);
  Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);  // errors on non-positive entries
  Tensor tanh(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor relu(const Tensor& a);

  // Structured broadcasts (the only broadcasting supported besides scalars).
  Tensor add_rowvec(const Tensor& a, const Tensor& v);  // (m,n) + (1,n)
  Tensor sub_colvec(const Tensor& a, const Tensor& v);  // (m,n) - (m,1)

  Tensor sum_all(const Tensor& a);
  Tensor mean_all(const Tensor& a);
  Tensor max_all(const Tensor& a);  // tie -> first occurrence (row-major)
  Tensor sum_axis(const Tensor& a, Axis axis);
  Tensor mean_axis(const Tensor& a, Axis axis);
  Tensor max_axis(const Tensor& a, Axis axis);

  Tensor row_l2_normalize(const Tensor& a);  // errors on near-zero rows
  Tensor softmax_rows(const Tensor& a);

  // Reverse sweep from a scalar loss. Non-scalar loss is an error.
  GradMap backward(const Tensor& loss) const;

  size_t size() const { return nodes_.size(); }

 private:
  using BackwardFn = std::function<void(const Mat& gout, std::vector<Mat>& grads)>;

  struct Node {
    int rows = 0;
    int cols = 0;
    bool requires_grad = false;
    bool is_leaf = false;
    std::shared_ptr<const Mat> value;
    BackwardFn backward;
  };

  Tensor record(Mat value, bool requires_grad, BackwardFn backward, const char* op);
  void check_same_tape(const Tensor& t, const char* op) const;
  Tensor unary_elementwise(const Tensor& a, const char* op,
                           double (*fwd)(double), double (*dfdx)(double, double));

  std::vector<Node> nodes_;
};

}  // namespace slamags
