// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xhy/core/io.hpp"
#include "xhy/corpus/saying.hpp"
#include "xhy/eval/metrics.hpp"
#include "xhy/eval/scorer.hpp"

namespace xhy::eval {

struct SampleMetrics {
  std::optional<double> bleu;
  std::optional<double> rouge_1;
  std::optional<double> rouge_2;
  std::optional<double> rouge_l;
  std::optional<double> bertscore;
  std::optional<double> coherency;
  std::optional<double> humor;
};

struct MetricReport {
  std::string model;
  corpus::Task task = corpus::Task::kCompletion;
  std::vector<std::string> outputs;
  std::vector<std::string> golds;
  std::vector<SampleMetrics> samples;

  // Arithmetic mean of a field over the samples that have it.
  std::optional<double> mean(std::optional<double> SampleMetrics::*field) const;
  OrderedJson to_json() const;
  void save(const std::filesystem::path& path) const;
};

struct EvaluationContext {
  std::string model = "unknown";
  const TokenEmbedder* embedder = nullptr;  // bertscore is skipped without one
  const LearnedScorer* scorer = nullptr;    // coherency and humor are skipped without one
  const SentenceEncoder* encoder = nullptr;  // required with a scorer
  BertScoreMode bertscore_mode = BertScoreMode::kPrecision;
};

// Completion outputs get every metric; scratch outputs only the learned
// scores. inputs, when given, are prefixed to completion outputs for the
// scorer as "riddle——output".
MetricReport evaluate_task(std::span<const std::string> outputs, std::span<const std::string> golds,
                           corpus::Task task, const MetricConfig& config,
                           const EvaluationContext& context = {},
                           std::span<const std::string> inputs = {});

}  // namespace xhy::eval
