// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xhy/core/autograd.hpp"
#include "xhy/corpus/segmenter.hpp"

namespace xhy::eval {

using Tokens = std::vector<std::string>;

struct MetricConfig {
  int bleu_max_n = 4;
  std::vector<double> bleu_weights;  // empty means uniform 1/N
  double bleu_smoothing_epsilon = 1e-9;
  double rouge_beta = 1.0;
  std::shared_ptr<const corpus::Segmenter> segmenter;  // null splits into characters

  void validate() const;
  std::vector<double> weights() const;
  Tokens tokenize(std::string_view text) const;
};

// BP * exp(sum_n w_n log p_n) with clipped precisions. A zero match count is
// replaced by epsilon. Orders longer than the candidate have no n-grams and
// are left out, the remaining weights rescaled to sum to one.
double bleu(const Tokens& candidate, const Tokens& reference, const MetricConfig& config = {});

// Clipped n-gram matches over all references divided by the references'
// n-gram count. References shorter than n are skipped.
double rouge_n(const Tokens& candidate, std::span<const Tokens> references, int n);
double rouge_n(const Tokens& candidate, const Tokens& reference, int n);

// LCS-based F measure. Both inputs must be non-empty.
double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.0);

std::size_t lcs_length(const Tokens& x, const Tokens& y);

// One vector per token, [tokens, dim].
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual ag::Matrix embed(const Tokens& tokens) const = 0;
};

enum class BertScoreMode {
  kPrecision,  // (1/|C|) sum_c max_r cos(c, r)
  kF1,         // harmonic mean of that and the reference-side counterpart
};

double bertscore(const ag::Matrix& candidate, const ag::Matrix& reference,
                 BertScoreMode mode = BertScoreMode::kPrecision);
double bertscore(const Tokens& candidate, const Tokens& reference, const TokenEmbedder& embedder,
                 BertScoreMode mode = BertScoreMode::kPrecision);

}  // namespace xhy::eval
