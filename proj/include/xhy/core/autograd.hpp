// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a handle to a node in a dynamically built graph. Each forward op
// allocates a node holding its value and a closure that pushes the incoming
// gradient to its parents. Calling backward() on a scalar Var visits the graph
// in reverse topological order. Leaves created with requires_grad (model
// parameters) keep their accumulated gradient until zero_grad().
//
// Everything is 2-D: a sentence is [positions, features]; batching is done by
// the caller, one graph per sentence, with gradients summed at the leaves.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace xhy::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(const Matrix& grad, std::span<const NodePtr> parents)>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows in
  std::vector<NodePtr> parents;
  BackwardFn backward;
  bool requires_grad = false;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  static Var scalar(double v);

  bool defined() const noexcept { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Direct mutable access, for optimizers and finite-difference probes.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  void zero_grad();
  // Seeds d(self)/d(self) = 1; self must be 1x1.
  void backward() const;

  const NodePtr& node() const { return node_; }

 private:
  friend Var make_result(Matrix value, std::vector<Var> parents, BackwardFn fn);
  NodePtr node_;
};

// Disables graph construction on this thread while alive. Inference under a
// guard never touches parameter gradients, so it is safe to run concurrently.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var make_result(Matrix value, std::vector<Var> parents, BackwardFn fn);

// --- ops -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// Broadcasts a [1, n] row over every row of a.
Var add_row(const Var& a, const Var& row);
Var add_const(const Var& a, const Matrix& c);
Var scale(const Var& a, double s);
Var gelu(const Var& a);
Var relu(const Var& a);
Var tanh(const Var& a);
// Root-mean-square layer norm over each row with learned gain [1, n].
Var rms_norm(const Var& a, const Var& gain, double eps = 1e-6);
// Row softmax of (a + additive_mask); pass an empty matrix for no mask.
Var softmax_rows(const Var& a, const Matrix& additive_mask = Matrix());
Var gather_rows(const Var& table, std::span<const int> indices);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
// Max over consecutive row groups of size group; output has rows/group rows.
Var group_max_rows(const Var& a, Eigen::Index group);
// Mean over rows whose mask entry is non-zero; output [1, cols].
Var masked_mean_rows(const Var& a, std::span<const std::uint8_t> mask);
Var sum(const Var& a);
Var mean(const Var& a);
// Inverted dropout; identity when rate == 0.
Var dropout(const Var& a, double rate, std::uint64_t seed);
// Mean token cross-entropy of row-wise logits; targets < 0 are ignored.
Var cross_entropy(const Var& logits, std::span<const int> targets);
Var mse(const Var& prediction, const Matrix& target);

// Generic escape hatch: value computed by the caller plus a closure returning
// one gradient per input given the upstream gradient.
Var custom(std::vector<Var> inputs, Matrix value,
           std::function<std::vector<Matrix>(const Matrix& grad)> grads);

}  // namespace xhy::ag
