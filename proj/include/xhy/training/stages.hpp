// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xhy/core/parameters.hpp"
#include "xhy/corpus/saying.hpp"
#include "xhy/model/fusion_model.hpp"
#include "xhy/model/text_pipeline.hpp"
#include "xhy/training/span_corruption.hpp"

namespace xhy::training {

// Where a stage writes. Empty paths disable the corresponding output.
struct StageOutputs {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path curve_log;  // JSONL, one record per logged step or epoch
};

struct Stage1Config {
  SpanCorruptionConfig span;
  AdamWConfig optimizer;
  int steps = 500;
  int batch_size = 16;
  int checkpoint_every = 100;  // 0 saves only at the end
  int log_every = 1;
  std::uint64_t seed = 0;
};

struct Stage1Result {
  std::vector<double> step_losses;  // one per step run in this call
  std::int64_t final_step = 0;
};

// Span-corruption pretraining over every parameter. Batch contents and
// dropout for step t depend only on (seed, t), so a run resumed from a
// checkpoint written at step t reproduces the uninterrupted run exactly.
// Checkpoints (with optimizer state) go to outputs.checkpoint_dir.
Stage1Result stage1_pretrain(model::FusionModel& model, const model::TextPipeline& pipeline,
                             std::span<const std::string> corpus, const Stage1Config& config,
                             const StageOutputs& outputs = {},
                             const std::optional<std::filesystem::path>& resume_from = {});

// Text lines of a corpus file; blank lines are skipped.
std::vector<std::string> read_corpus_lines(std::span<const std::filesystem::path> paths);

struct ContrastivePair {
  std::string riddle;         // anchor r
  std::string explanation;    // positive e
  std::string hard_negative;  // paired negative c
};

struct Stage2Config {
  int batch_size = 64;
  double tau = 0.05;
  int epochs = 5;
  AdamWConfig optimizer;
  std::uint64_t seed = 0;
};

struct Stage2Result {
  std::vector<double> epoch_losses;
};

// Contrastive learning on pooled encoder outputs. Updates everything except
// the decoder stack and output projection, which stay bitwise unchanged.
// A final batch smaller than 2 is folded into the previous one.
Stage2Result stage2_contrast(model::FusionModel& model, const model::TextPipeline& pipeline,
                             std::span<const ContrastivePair> pairs, const Stage2Config& config,
                             const StageOutputs& outputs = {});

struct SimilarityGap {
  double positive = 0.0;  // mean cos(r_i, e_i)
  double negative = 0.0;  // mean cos(r_i, c_i)
};
SimilarityGap measure_similarity(const model::FusionModel& model,
                                 const model::TextPipeline& pipeline,
                                 std::span<const ContrastivePair> pairs);

struct Stage3Config {
  corpus::Task task = corpus::Task::kCompletion;
  int epochs = 20;
  int batch_size = 16;
  AdamWConfig optimizer;
  std::uint64_t seed = 0;
};

struct Stage3Result {
  std::vector<double> train_losses;       // mean training loss per epoch
  std::vector<double> validation_losses;  // per epoch, on the validation split
};

// Teacher-forced fine-tuning on split.train; validation loss is computed on
// split.validation only.
Stage3Result stage3_finetune(model::FusionModel& model, const model::TextPipeline& pipeline,
                             const corpus::DatasetSplit& split, const Stage3Config& config,
                             const StageOutputs& outputs = {});

// Mean teacher-forced loss without dropout.
double evaluation_loss(const model::FusionModel& model, const model::TextPipeline& pipeline,
                       std::span<const corpus::TaskExample> examples);

}  // namespace xhy::training
