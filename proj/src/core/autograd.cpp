// SPDX-License-Identifier: Apache-2.0
#include "xhy/core/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"

namespace xhy::ag {
namespace {

thread_local bool g_grad_enabled = true;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::kShapeMismatch,
         std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
             std::to_string(b.cols()) + ")");
  }
}

constexpr double kSqrt2OverPi = 0.7978845608028654;
constexpr double kGeluCubic = 0.044715;

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Var(std::move(m));
}

double Var::item() const {
  require(rows() == 1 && cols() == 1, ErrorKind::kShapeMismatch,
          "item() on a non-scalar");
  return node_->value(0, 0);
}

void Var::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

void Var::backward() const {
  require(rows() == 1 && cols() == 1, ErrorKind::kShapeMismatch,
          "backward() requires a scalar");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) {
      node->backward(node->grad, node->parents);
      // Interior gradients are not needed once pushed upstream.
      node->grad.resize(0, 0);
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var make_result(Matrix value, std::vector<Var> parents, BackwardFn fn) {
  Var out(std::move(value));
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Var& p) { return p.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node());
  out.node_->backward = std::move(fn);
  return out;
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::kShapeMismatch,
         "matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
             std::to_string(b.rows()) + ")");
  }
  Matrix value = a.value() * b.value();
  return make_result(std::move(value), {a, b},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       if (p[0]->requires_grad) p[0]->accumulate(g * p[1]->value.transpose());
                       if (p[1]->requires_grad) p[1]->accumulate(p[0]->value.transpose() * g);
                     });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorKind::kShapeMismatch, "matmul_nt: column counts differ");
  }
  Matrix value = a.value() * b.value().transpose();
  return make_result(std::move(value), {a, b},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       if (p[0]->requires_grad) p[0]->accumulate(g * p[1]->value);
                       if (p[1]->requires_grad) p[1]->accumulate(g.transpose() * p[0]->value);
                     });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       if (p[0]->requires_grad) p[0]->accumulate(g);
                       if (p[1]->requires_grad) p[1]->accumulate(g);
                     });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       if (p[0]->requires_grad) p[0]->accumulate(g);
                       if (p[1]->requires_grad) p[1]->accumulate(-g);
                     });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       if (p[0]->requires_grad) p[0]->accumulate(g.cwiseProduct(p[1]->value));
                       if (p[1]->requires_grad) p[1]->accumulate(g.cwiseProduct(p[0]->value));
                     });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::kShapeMismatch,
          "add_row: row must be [1, cols]");
  Matrix value = a.value();
  value.rowwise() += row.value().row(0);
  return make_result(std::move(value), {a, row},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       if (p[0]->requires_grad) p[0]->accumulate(g);
                       if (p[1]->requires_grad) p[1]->accumulate(g.colwise().sum());
                     });
}

Var add_const(const Var& a, const Matrix& c) {
  require(a.rows() == c.rows() && a.cols() == c.cols(), ErrorKind::kShapeMismatch,
          "add_const: shape mismatch");
  return make_result(a.value() + c, {a},
                     [](const Matrix& g, std::span<const NodePtr> p) { p[0]->accumulate(g); });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a},
                     [s](const Matrix& g, std::span<const NodePtr> p) { p[0]->accumulate(g * s); });
}

Var gelu(const Var& a) {
  // tanh approximation
  const Matrix& x = a.value();
  Matrix inner = (kSqrt2OverPi * (x.array() + kGeluCubic * x.array().cube())).matrix();
  Matrix t = inner.array().tanh().matrix();
  Matrix value = (0.5 * x.array() * (1.0 + t.array())).matrix();
  return make_result(std::move(value), {a},
                     [t](const Matrix& g, std::span<const NodePtr> p) {
                       const auto& x = p[0]->value.array();
                       auto dinner = kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * x.square());
                       auto d = 0.5 * (1.0 + t.array()) +
                                0.5 * x * (1.0 - t.array().square()) * dinner;
                       p[0]->accumulate((g.array() * d).matrix());
                     });
}

Var relu(const Var& a) {
  Matrix value = a.value().cwiseMax(0.0);
  return make_result(std::move(value), {a},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       p[0]->accumulate(
                           (g.array() * (p[0]->value.array() > 0.0).cast<double>()).matrix());
                     });
}

Var tanh(const Var& a) {
  Matrix value = a.value().array().tanh().matrix();
  Matrix y = value;
  return make_result(std::move(value), {a},
                     [y](const Matrix& g, std::span<const NodePtr> p) {
                       p[0]->accumulate((g.array() * (1.0 - y.array().square())).matrix());
                     });
}

Var rms_norm(const Var& a, const Var& gain, double eps) {
  require(gain.rows() == 1 && gain.cols() == a.cols(), ErrorKind::kShapeMismatch,
          "rms_norm: gain must be [1, cols]");
  const Matrix& x = a.value();
  const auto n = static_cast<double>(x.cols());
  Eigen::VectorXd inv_rms(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    inv_rms(i) = 1.0 / std::sqrt(x.row(i).squaredNorm() / n + eps);
  }
  Matrix normed = inv_rms.asDiagonal() * x;
  Matrix value = normed;
  value.array().rowwise() *= gain.value().row(0).array();
  return make_result(
      std::move(value), {a, gain},
      [normed, inv_rms, n](const Matrix& g, std::span<const NodePtr> p) {
        const Matrix& gain_v = p[1]->value;
        if (p[1]->requires_grad) {
          p[1]->accumulate(g.cwiseProduct(normed).colwise().sum());
        }
        if (p[0]->requires_grad) {
          Matrix gy = g;
          gy.array().rowwise() *= gain_v.row(0).array();
          Matrix dx(gy.rows(), gy.cols());
          for (Eigen::Index i = 0; i < gy.rows(); ++i) {
            const double dot = gy.row(i).dot(normed.row(i));
            dx.row(i) = inv_rms(i) * (gy.row(i) - normed.row(i) * (dot / n));
          }
          p[0]->accumulate(dx);
        }
      });
}

Var softmax_rows(const Var& a, const Matrix& additive_mask) {
  Matrix z = a.value();
  if (additive_mask.size() != 0) {
    require(additive_mask.rows() == z.rows() && additive_mask.cols() == z.cols(),
            ErrorKind::kShapeMismatch, "softmax_rows: mask shape mismatch");
    z += additive_mask;
  }
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
  Matrix y = z;
  return make_result(std::move(z), {a},
                     [y](const Matrix& g, std::span<const NodePtr> p) {
                       Matrix gy = g.cwiseProduct(y);
                       Eigen::VectorXd s = gy.rowwise().sum();
                       Matrix dx = gy - y.cwiseProduct(s.replicate(1, y.cols()));
                       p[0]->accumulate(dx);
                     });
}

Var gather_rows(const Var& table, std::span<const int> indices) {
  Matrix value(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= table.rows()) {
      fail(ErrorKind::kInvalidArgument,
           "gather_rows: index " + std::to_string(idx) + " out of range [0, " +
               std::to_string(table.rows()) + ")");
    }
    value.row(static_cast<Eigen::Index>(i)) = table.value().row(idx);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return make_result(std::move(value), {table},
                     [idx = std::move(idx)](const Matrix& g, std::span<const NodePtr> p) {
                       Node& t = *p[0];
                       if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         t.grad.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                       }
                     });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorKind::kShapeMismatch,
          "slice_cols: range out of bounds");
  Matrix value = a.value().middleCols(start, count);
  return make_result(std::move(value), {a},
                     [start, count](const Matrix& g, std::span<const NodePtr> p) {
                       Node& n = *p[0];
                       if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
                       n.grad.middleCols(start, count) += g;
                     });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::kInvalidArgument, "concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& part : parts) {
    require(part.rows() == rows, ErrorKind::kShapeMismatch, "concat_cols: row counts differ");
    cols += part.cols();
  }
  Matrix value(rows, cols);
  std::vector<Eigen::Index> widths;
  Eigen::Index offset = 0;
  for (const auto& part : parts) {
    value.middleCols(offset, part.cols()) = part.value();
    offset += part.cols();
    widths.push_back(part.cols());
  }
  return make_result(std::move(value), std::vector<Var>(parts.begin(), parts.end()),
                     [widths](const Matrix& g, std::span<const NodePtr> p) {
                       Eigen::Index off = 0;
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         if (p[i]->requires_grad) p[i]->accumulate(g.middleCols(off, widths[i]));
                         off += widths[i];
                       }
                     });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::kInvalidArgument, "concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& part : parts) {
    require(part.cols() == cols, ErrorKind::kShapeMismatch, "concat_rows: column counts differ");
    rows += part.rows();
  }
  Matrix value(rows, cols);
  std::vector<Eigen::Index> heights;
  Eigen::Index offset = 0;
  for (const auto& part : parts) {
    value.middleRows(offset, part.rows()) = part.value();
    offset += part.rows();
    heights.push_back(part.rows());
  }
  return make_result(std::move(value), std::vector<Var>(parts.begin(), parts.end()),
                     [heights](const Matrix& g, std::span<const NodePtr> p) {
                       Eigen::Index off = 0;
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         if (p[i]->requires_grad) p[i]->accumulate(g.middleRows(off, heights[i]));
                         off += heights[i];
                       }
                     });
}

Var group_max_rows(const Var& a, Eigen::Index group) {
  require(group > 0 && a.rows() % group == 0, ErrorKind::kShapeMismatch,
          "group_max_rows: rows not divisible by group size");
  const Eigen::Index groups = a.rows() / group;
  const Matrix& x = a.value();
  Matrix value(groups, x.cols());
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(groups * x.cols()));
  for (Eigen::Index gi = 0; gi < groups; ++gi) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::Index best = gi * group;
      for (Eigen::Index r = gi * group + 1; r < (gi + 1) * group; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      value(gi, c) = x(best, c);
      argmax[static_cast<std::size_t>(gi * x.cols() + c)] = best;
    }
  }
  return make_result(std::move(value), {a},
                     [argmax = std::move(argmax)](const Matrix& g, std::span<const NodePtr> p) {
                       Node& n = *p[0];
                       if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
                       for (Eigen::Index gi = 0; gi < g.rows(); ++gi) {
                         for (Eigen::Index c = 0; c < g.cols(); ++c) {
                           n.grad(argmax[static_cast<std::size_t>(gi * g.cols() + c)], c) += g(gi, c);
                         }
                       }
                     });
}

Var masked_mean_rows(const Var& a, std::span<const std::uint8_t> mask) {
  require(static_cast<Eigen::Index>(mask.size()) == a.rows(), ErrorKind::kShapeMismatch,
          "masked_mean_rows: mask length differs from row count");
  std::vector<Eigen::Index> live;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) live.push_back(static_cast<Eigen::Index>(i));
  }
  require(!live.empty(), ErrorKind::kInvalidArgument, "masked mean over an all-padding input");
  Matrix value = Matrix::Zero(1, a.cols());
  for (auto r : live) value += a.value().row(r);
  const double inv = 1.0 / static_cast<double>(live.size());
  value *= inv;
  return make_result(std::move(value), {a},
                     [live, inv](const Matrix& g, std::span<const NodePtr> p) {
                       Node& n = *p[0];
                       if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
                       for (auto r : live) n.grad.row(r) += g.row(0) * inv;
                     });
}

Var sum(const Var& a) {
  Matrix value(1, 1);
  value(0, 0) = a.value().sum();
  return make_result(std::move(value), {a},
                     [](const Matrix& g, std::span<const NodePtr> p) {
                       p[0]->accumulate(Matrix::Constant(p[0]->value.rows(), p[0]->value.cols(), g(0, 0)));
                     });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var dropout(const Var& a, double rate, std::uint64_t seed) {
  if (rate <= 0.0) return a;
  require(rate < 1.0, ErrorKind::kInvalidArgument, "dropout rate must be < 1");
  Rng rng(seed);
  Matrix keep(a.rows(), a.cols());
  const double s = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < keep.size(); ++i) keep.data()[i] = rng.bernoulli(rate) ? 0.0 : s;
  return make_result(a.value().cwiseProduct(keep), {a},
                     [keep](const Matrix& g, std::span<const NodePtr> p) {
                       p[0]->accumulate(g.cwiseProduct(keep));
                     });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(), ErrorKind::kShapeMismatch,
          "cross_entropy: one target per logit row required");
  const Matrix& z = logits.value();
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - m).exp().matrix();
    const double norm = probs.row(i).sum();
    probs.row(i) /= norm;
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0) continue;
    require(t < z.cols(), ErrorKind::kInvalidArgument, "cross_entropy: target out of range");
    total += -(z(i, t) - m - std::log(norm));
    ++count;
  }
  require(count > 0, ErrorKind::kInvalidArgument, "cross_entropy: no targets");
  Matrix value(1, 1);
  value(0, 0) = total / count;
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(std::move(value), {logits},
                     [probs, tgt = std::move(tgt), count](const Matrix& g, std::span<const NodePtr> p) {
                       Matrix d = probs;
                       for (Eigen::Index i = 0; i < d.rows(); ++i) {
                         const int t = tgt[static_cast<std::size_t>(i)];
                         if (t < 0) {
                           d.row(i).setZero();
                         } else {
                           d(i, t) -= 1.0;
                         }
                       }
                       p[0]->accumulate(d * (g(0, 0) / count));
                     });
}

Var mse(const Var& prediction, const Matrix& target) {
  require(prediction.rows() == target.rows() && prediction.cols() == target.cols(),
          ErrorKind::kShapeMismatch, "mse: shape mismatch");
  Matrix diff = prediction.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix value(1, 1);
  value(0, 0) = diff.squaredNorm() / n;
  return make_result(std::move(value), {prediction},
                     [diff, n](const Matrix& g, std::span<const NodePtr> p) {
                       p[0]->accumulate(diff * (2.0 * g(0, 0) / n));
                     });
}

Var custom(std::vector<Var> inputs, Matrix value,
           std::function<std::vector<Matrix>(const Matrix& grad)> grads) {
  return make_result(std::move(value), std::move(inputs),
                     [grads = std::move(grads)](const Matrix& g, std::span<const NodePtr> p) {
                       auto gs = grads(g);
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         if (p[i]->requires_grad && gs[i].size() != 0) p[i]->accumulate(gs[i]);
                       }
                     });
}

}  // namespace xhy::ag
