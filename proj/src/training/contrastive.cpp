// SPDX-License-Identifier: Apache-2.0
#include "xhy/training/contrastive.hpp"

#include <cmath>

#include "xhy/core/error.hpp"

namespace xhy::training {

using ag::Matrix;

namespace {

struct Normalized {
  Matrix unit;
  Eigen::VectorXd norms;
};

Normalized normalize_rows(const Matrix& m) {
  Normalized out{m, m.rowwise().norm()};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    require(out.norms(i) > 0.0, ErrorKind::kNumeric, "cosine similarity of a zero-norm vector");
    out.unit.row(i) /= out.norms(i);
  }
  return out;
}

// Backprop through x / |x| row by row.
Matrix unnormalize_grad(const Normalized& n, const Matrix& g) {
  Matrix out(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double dot = n.unit.row(i).dot(g.row(i));
    out.row(i) = (g.row(i) - dot * n.unit.row(i)) / n.norms(i);
  }
  return out;
}

Matrix stack(const std::vector<Eigen::VectorXd>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

struct Forward {
  Eigen::VectorXd losses;
  Matrix p;  // softmax weight on each positive e_j for anchor i
  Eigen::VectorXd q;  // softmax weight on the hard negative c_i
};

Forward forward(const Matrix& r, const Matrix& e, const Matrix& c, double tau) {
  const Eigen::Index n = r.rows();
  const Matrix s = r * e.transpose() / tau;
  const Eigen::VectorXd t = (r.cwiseProduct(c)).rowwise().sum() / tau;
  Forward f{Eigen::VectorXd(n), Matrix(n, n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = std::max(s.row(i).maxCoeff(), t(i));
    const Eigen::RowVectorXd ex = (s.row(i).array() - hi).exp();
    const double ec = std::exp(t(i) - hi);
    const double z = ex.sum() + ec;
    f.losses(i) = -(s(i, i) - hi) + std::log(z);
    f.p.row(i) = ex / z;
    f.q(i) = ec / z;
  }
  return f;
}

}  // namespace

void ContrastiveBatch::validate() const {
  require(!anchors.empty(), ErrorKind::kInvalidArgument, "contrastive batch is empty");
  require(anchors.size() == positives.size() && anchors.size() == hard_negatives.size(),
          ErrorKind::kShapeMismatch, "anchors, positives and hard negatives differ in count");
  require(tau > 0.0, ErrorKind::kInvalidArgument, "temperature must be positive");
  const auto d = anchors.front().size();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    require(anchors[i].size() == d && positives[i].size() == d && hard_negatives[i].size() == d,
            ErrorKind::kShapeMismatch, "contrastive vectors differ in width");
  }
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  require(na > 0.0 && nb > 0.0, ErrorKind::kNumeric, "cosine similarity of a zero-norm vector");
  return a.dot(b) / (na * nb);
}

std::vector<double> contrastive_losses(const ContrastiveBatch& batch) {
  batch.validate();
  const auto f = forward(normalize_rows(stack(batch.anchors)).unit,
                         normalize_rows(stack(batch.positives)).unit,
                         normalize_rows(stack(batch.hard_negatives)).unit, batch.tau);
  return {f.losses.data(), f.losses.data() + f.losses.size()};
}

double contrastive_loss(const ContrastiveBatch& batch) {
  const auto losses = contrastive_losses(batch);
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(losses.size());
}

ag::Var contrastive_loss(const ag::Var& anchors, const ag::Var& positives,
                         const ag::Var& hard_negatives, double tau) {
  require(tau > 0.0, ErrorKind::kInvalidArgument, "temperature must be positive");
  require(anchors.rows() >= 1, ErrorKind::kInvalidArgument, "contrastive batch is empty");
  require(anchors.rows() == positives.rows() && anchors.rows() == hard_negatives.rows() &&
              anchors.cols() == positives.cols() && anchors.cols() == hard_negatives.cols(),
          ErrorKind::kShapeMismatch, "contrastive inputs differ in shape");
  const auto r = normalize_rows(anchors.value());
  const auto e = normalize_rows(positives.value());
  const auto c = normalize_rows(hard_negatives.value());
  const auto f = forward(r.unit, e.unit, c.unit, tau);
  const auto n = static_cast<double>(anchors.rows());
  Matrix value(1, 1);
  value(0, 0) = f.losses.mean();

  return ag::custom({anchors, positives, hard_negatives}, value,
                    [r, e, c, f, n, tau](const Matrix& g) {
                      const double scale = g(0, 0) / (n * tau);
                      Matrix ds = f.p;
                      ds.diagonal().array() -= 1.0;
                      ds *= scale;
                      const Eigen::VectorXd dt = f.q * scale;
                      const Matrix gr = ds * e.unit + dt.asDiagonal() * c.unit;
                      const Matrix ge = ds.transpose() * r.unit;
                      const Matrix gc = dt.asDiagonal() * r.unit;
                      return std::vector<Matrix>{unnormalize_grad(r, gr), unnormalize_grad(e, ge),
                                                 unnormalize_grad(c, gc)};
                    });
}

}  // namespace xhy::training
