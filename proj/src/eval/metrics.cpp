// SPDX-License-Identifier: Apache-2.0
#include "xhy/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <spdlog/spdlog.h>

#include "xhy/core/error.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::eval {

namespace {

using NgramCounts = std::map<std::vector<std::string_view>, int>;

NgramCounts count_ngrams(const Tokens& tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<int>(tokens.size());
  for (int i = 0; i + n <= len; ++i) {
    std::vector<std::string_view> key(tokens.begin() + i, tokens.begin() + i + n);
    ++counts[std::move(key)];
  }
  return counts;
}

int clipped_matches(const NgramCounts& candidate, const NgramCounts& reference) {
  int matches = 0;
  for (const auto& [gram, count] : candidate) {
    const auto it = reference.find(gram);
    if (it != reference.end()) matches += std::min(count, it->second);
  }
  return matches;
}

int total(const NgramCounts& counts) {
  int n = 0;
  for (const auto& [gram, count] : counts) n += count;
  return n;
}

}  // namespace

void MetricConfig::validate() const {
  require(bleu_max_n >= 1, ErrorKind::kConfig, "bleu_max_n must be at least 1");
  require(bleu_smoothing_epsilon > 0.0, ErrorKind::kConfig, "bleu_smoothing_epsilon must be positive");
  require(rouge_beta >= 0.0, ErrorKind::kConfig, "rouge_beta must be non-negative");
  if (bleu_weights.empty()) return;
  require(static_cast<int>(bleu_weights.size()) == bleu_max_n, ErrorKind::kConfig,
          "bleu_weights needs one weight per order");
  double sum = 0.0;
  for (double w : bleu_weights) {
    require(w >= 0.0, ErrorKind::kConfig, "bleu weights must be non-negative");
    sum += w;
  }
  require(std::abs(sum - 1.0) < 1e-9, ErrorKind::kConfig, "bleu weights must sum to 1");
}

std::vector<double> MetricConfig::weights() const {
  if (!bleu_weights.empty()) return bleu_weights;
  return std::vector<double>(static_cast<std::size_t>(bleu_max_n), 1.0 / bleu_max_n);
}

Tokens MetricConfig::tokenize(std::string_view text) const {
  if (segmenter) return segmenter->words(text);
  Tokens out;
  for (auto& c : utf8::chars(text)) {
    if (!utf8::trim(c).empty()) out.push_back(std::move(c));
  }
  return out;
}

double bleu(const Tokens& candidate, const Tokens& reference, const MetricConfig& config) {
  config.validate();
  if (candidate.empty()) {
    spdlog::warn("bleu: empty candidate scores 0");
    return 0.0;
  }
  const auto weights = config.weights();
  double log_sum = 0.0;
  double weight_sum = 0.0;
  for (int n = 1; n <= config.bleu_max_n; ++n) {
    const auto cand = count_ngrams(candidate, n);
    const int denom = total(cand);
    if (denom == 0) break;
    const int matches = clipped_matches(cand, count_ngrams(reference, n));
    const double p = matches > 0 ? static_cast<double>(matches) / denom
                                 : config.bleu_smoothing_epsilon / denom;
    log_sum += weights[n - 1] * std::log(p);
    weight_sum += weights[n - 1];
  }
  const auto c = static_cast<double>(candidate.size());
  const auto r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  if (weight_sum <= 0.0) return bp;
  return bp * std::exp(log_sum / weight_sum);
}

double rouge_n(const Tokens& candidate, std::span<const Tokens> references, int n) {
  require(n >= 1, ErrorKind::kInvalidArgument, "rouge_n needs n >= 1");
  const auto cand = count_ngrams(candidate, n);
  int matched = 0;
  int denom = 0;
  for (const auto& ref : references) {
    if (static_cast<int>(ref.size()) < n) continue;
    const auto counts = count_ngrams(ref, n);
    matched += clipped_matches(cand, counts);
    denom += total(counts);
  }
  if (denom == 0) {
    spdlog::warn("rouge_n: every reference is shorter than n={}", n);
    return 0.0;
  }
  return static_cast<double>(matched) / denom;
}

double rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
  return rouge_n(candidate, std::span<const Tokens>(&reference, 1), n);
}

std::size_t lcs_length(const Tokens& x, const Tokens& y) {
  std::vector<std::size_t> prev(y.size() + 1, 0);
  std::vector<std::size_t> cur(y.size() + 1, 0);
  for (const auto& a : x) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = a == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
  require(!candidate.empty() && !reference.empty(), ErrorKind::kInvalidArgument,
          "rouge_l of an empty sequence");
  require(beta >= 0.0, ErrorKind::kInvalidArgument, "rouge_l beta must be non-negative");
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double r = lcs / static_cast<double>(reference.size());
  const double p = lcs / static_cast<double>(candidate.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * r * p / (r + b2 * p);
}

namespace {

ag::Matrix unit_rows(const ag::Matrix& m) {
  ag::Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    require(norm > 0.0, ErrorKind::kNumeric, "bertscore: zero-norm token embedding");
    out.row(i) /= norm;
  }
  return out;
}

}  // namespace

double bertscore(const ag::Matrix& candidate, const ag::Matrix& reference, BertScoreMode mode) {
  require(candidate.rows() > 0 && reference.rows() > 0, ErrorKind::kInvalidArgument,
          "bertscore of an empty sequence");
  require(candidate.cols() == reference.cols(), ErrorKind::kShapeMismatch,
          "bertscore: embedding widths differ");
  const ag::Matrix sim = unit_rows(candidate) * unit_rows(reference).transpose();
  const double precision = sim.rowwise().maxCoeff().mean();
  if (mode == BertScoreMode::kPrecision) return precision;
  const double recall = sim.colwise().maxCoeff().mean();
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double bertscore(const Tokens& candidate, const Tokens& reference, const TokenEmbedder& embedder,
                 BertScoreMode mode) {
  require(!candidate.empty() && !reference.empty(), ErrorKind::kInvalidArgument,
          "bertscore of an empty sequence");
  return bertscore(embedder.embed(candidate), embedder.embed(reference), mode);
}

}  // namespace xhy::eval
