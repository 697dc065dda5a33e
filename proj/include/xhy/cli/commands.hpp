// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "xhy/cli/run_config.hpp"
#include "xhy/prompting/client.hpp"

namespace xhy::cli {

// File layout under the work directory.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path manifest(std::string_view split) const;
  std::filesystem::path task_file(corpus::Task task, std::string_view split) const;
  std::filesystem::path stage_dir(int stage, corpus::Task task) const;
  std::filesystem::path curve_log(int stage, corpus::Task task) const;
  std::filesystem::path hard_negative_cache() const { return root_ / "hard_negatives.jsonl"; }
  std::filesystem::path model_outputs(corpus::Task task) const;
  std::filesystem::path prompt_outputs(corpus::Task task, int shots) const;
  std::filesystem::path prompts(corpus::Task task, int shots) const;
  std::filesystem::path audit_log() const { return root_ / "outputs" / "audit.jsonl"; }
  std::filesystem::path report(corpus::Task task, std::string_view source) const;
  std::filesystem::path scorer_dir() const { return root_ / "scorer"; }

 private:
  std::filesystem::path root_;
};

// Each command returns a one-line JSON summary for stdout.

// Corpus -> subjects -> split manifests and task files for both tasks.
OrderedJson cmd_prepare(const RunConfig& config);

// Stage 1 starts fresh (or from paths.backbone) and resumes a partial run;
// stages 2 and 3 need the previous stage's checkpoint.
OrderedJson cmd_train(const RunConfig& config, int stage);

// One output per test input from the stage-3 model of the configured task.
OrderedJson cmd_generate(const RunConfig& config);

// Renders zero- or few-shot prompts for the test split and sends them.
// A null client reads the endpoint from the environment.
OrderedJson cmd_prompt(const RunConfig& config, prompting::ChatClient* client = nullptr);

// Scores an outputs file against the test split and writes a MetricReport.
OrderedJson cmd_evaluate(const RunConfig& config);

// Trains the coherency/humor scorer on paths.annotations.
OrderedJson cmd_score(const RunConfig& config);

}  // namespace xhy::cli
