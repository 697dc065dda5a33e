// SPDX-License-Identifier: Apache-2.0
#include "xhy/eval/report.hpp"

#include <cmath>
#include <utility>

#include "xhy/core/error.hpp"

namespace xhy::eval {

namespace {

using Field = std::optional<double> SampleMetrics::*;

const std::pair<const char*, Field> kFields[] = {
    {"bleu", &SampleMetrics::bleu},           {"rouge_1", &SampleMetrics::rouge_1},
    {"rouge_2", &SampleMetrics::rouge_2},     {"rouge_l", &SampleMetrics::rouge_l},
    {"bertscore", &SampleMetrics::bertscore}, {"coherency", &SampleMetrics::coherency},
    {"humor", &SampleMetrics::humor},
};

constexpr std::string_view kDash = "——";

}  // namespace

std::optional<double> MetricReport::mean(Field field) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (!(s.*field)) continue;
    sum += *(s.*field);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

OrderedJson MetricReport::to_json() const {
  OrderedJson j;
  j["model"] = model;
  j["task"] = std::string(corpus::to_string(task));
  j["count"] = samples.size();
  OrderedJson means = OrderedJson::object();
  for (const auto& [name, field] : kFields) {
    if (const auto m = mean(field)) means[name] = *m;
  }
  j["means"] = means;
  OrderedJson rows = OrderedJson::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    OrderedJson row;
    row["index"] = i;
    row["output"] = outputs[i];
    row["gold"] = golds[i];
    for (const auto& [name, field] : kFields) {
      if (samples[i].*field) row[name] = *(samples[i].*field);
    }
    rows.push_back(std::move(row));
  }
  j["samples"] = std::move(rows);
  return j;
}

void MetricReport::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_text(path, to_json().dump(2) + "\n");
}

MetricReport evaluate_task(std::span<const std::string> outputs, std::span<const std::string> golds,
                           corpus::Task task, const MetricConfig& config,
                           const EvaluationContext& context, std::span<const std::string> inputs) {
  require(outputs.size() == golds.size(), ErrorKind::kShapeMismatch,
          "evaluate: " + std::to_string(outputs.size()) + " outputs for " +
              std::to_string(golds.size()) + " references");
  require(inputs.empty() || inputs.size() == outputs.size(), ErrorKind::kShapeMismatch,
          "evaluate: inputs are not aligned with outputs");
  require(!context.scorer || context.encoder, ErrorKind::kConfig,
          "evaluate: a scorer needs a sentence encoder");
  require(task == corpus::Task::kCompletion || context.scorer, ErrorKind::kMissingPrerequisite,
          "evaluate: the scratch task is scored only by the learned scorer, none given");
  config.validate();

  MetricReport report;
  report.model = context.model;
  report.task = task;
  report.outputs.assign(outputs.begin(), outputs.end());
  report.golds.assign(golds.begin(), golds.end());

  for (std::size_t i = 0; i < outputs.size(); ++i) {
    SampleMetrics m;
    if (task == corpus::Task::kCompletion) {
      const auto cand = config.tokenize(outputs[i]);
      const auto ref = config.tokenize(golds[i]);
      m.bleu = bleu(cand, ref, config);
      m.rouge_1 = rouge_n(cand, ref, 1);
      m.rouge_2 = rouge_n(cand, ref, 2);
      // an empty generation shares nothing with the reference
      m.rouge_l = cand.empty() || ref.empty() ? 0.0 : rouge_l(cand, ref, config.rouge_beta);
      if (context.embedder) {
        m.bertscore = cand.empty() || ref.empty()
                          ? 0.0
                          : bertscore(cand, ref, *context.embedder, context.bertscore_mode);
      }
    }
    if (context.scorer) {
      std::string text = outputs[i];
      if (task == corpus::Task::kCompletion && !inputs.empty()) {
        text = inputs[i] + std::string(kDash) + outputs[i];
      }
      const auto s = context.scorer->predict(text, *context.encoder);
      m.coherency = s.coherency;
      m.humor = s.humor;
    }
    for (const auto& [name, field] : kFields) {
      require(!(m.*field) || std::isfinite(*(m.*field)), ErrorKind::kNumeric,
              std::string("non-finite ") + name);
    }
    report.samples.push_back(m);
  }
  return report;
}

}  // namespace xhy::eval
