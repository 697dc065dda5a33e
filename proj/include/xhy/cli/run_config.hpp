// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xhy/core/io.hpp"
#include "xhy/corpus/saying.hpp"
#include "xhy/eval/metrics.hpp"
#include "xhy/eval/scorer.hpp"
#include "xhy/model/config.hpp"
#include "xhy/model/tokenizer.hpp"
#include "xhy/training/stages.hpp"

namespace xhy::cli {

struct Paths {
  std::filesystem::path corpus = "data/sayings_500.jsonl";
  std::filesystem::path lexicon = "data/pinyin_lexicon.tsv";
  std::filesystem::path words = "data/words.tsv";
  std::filesystem::path templates = "assets/templates";
  std::filesystem::path work = "runs/desk";
  std::filesystem::path annotations;                // score command input
  std::vector<std::filesystem::path> stage1_corpus;  // empty: train-split sayings
  std::filesystem::path backbone;                   // optional parameters.bin for stage 1
};

struct GenerationConfig {
  bool sampling = false;
  double temperature = 1.0;
  int max_gen_len = 0;  // 0 uses the model config
};

struct PromptConfig {
  std::string language = "zh";
  int shots = 0;
  std::string system;
  double temperature = 0.0;
  int max_tokens = 128;
  int concurrency = 4;
  int max_attempts = 5;
};

struct MetricsConfig {
  eval::MetricConfig metric;
  std::string embedder = "model";  // "model" or "hashed"
  bool bertscore_f1 = false;
  std::filesystem::path outputs;   // empty: the generate output for the task
};

struct ScoreConfig {
  eval::ScorerConfig scorer;
  std::string encoder = "model";  // "model" or "hashed"
  int hashed_dim = 64;
};

struct RunConfig {
  std::filesystem::path base_dir = ".";  // relative paths resolve against this
  std::uint64_t seed = 13;
  corpus::Task task = corpus::Task::kCompletion;
  Paths paths;
  corpus::SplitRatios split;
  model::TokenizerConfig tokenizer;
  model::FusionModelConfig model;
  training::Stage1Config stage1;
  training::Stage2Config stage2;
  training::Stage3Config stage3;
  GenerationConfig generation;
  PromptConfig prompt;
  MetricsConfig metrics;
  ScoreConfig score;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path work() const { return resolve(paths.work); }
  // Propagates the root seed and task into the per-stage configs.
  void finalize();
  void validate() const;
};

// Desk-scale defaults.
RunConfig default_config();

// Unknown keys at any level are a kConfig error. Relative paths in the file
// resolve against base_dir.
RunConfig parse_config(const Json& json, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);
OrderedJson to_json(const RunConfig& config);

}  // namespace xhy::cli
