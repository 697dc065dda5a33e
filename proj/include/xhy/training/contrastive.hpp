// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "xhy/core/autograd.hpp"

namespace xhy::training {

struct ContrastiveBatch {
  std::vector<Eigen::VectorXd> anchors;         // r_i
  std::vector<Eigen::VectorXd> positives;       // e_i
  std::vector<Eigen::VectorXd> hard_negatives;  // c_i, paired with anchor i
  double tau = 0.05;

  void validate() const;
};

// Throws Error(kNumeric) when either vector has zero norm.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// l_i = -log( exp(s(r_i,e_i)/tau) / (exp(s(r_i,c_i)/tau) + sum_j exp(s(r_i,e_j)/tau)) )
// with s the cosine similarity. Anchor i sees only its own hard negative.
std::vector<double> contrastive_losses(const ContrastiveBatch& batch);
// Mean of contrastive_losses.
double contrastive_loss(const ContrastiveBatch& batch);

// Differentiable form over row-stacked [N, d] anchors, positives and
// hard negatives.
ag::Var contrastive_loss(const ag::Var& anchors, const ag::Var& positives,
                         const ag::Var& hard_negatives, double tau);

}  // namespace xhy::training
