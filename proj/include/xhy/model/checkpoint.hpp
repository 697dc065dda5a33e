// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "xhy/core/io.hpp"
#include "xhy/core/parameters.hpp"
#include "xhy/model/fusion_model.hpp"
#include "xhy/model/tokenizer.hpp"

namespace xhy::model {

// Checkpoint directory layout:
//   config.json         every FusionModelConfig field
//   tokenizer.tsv       tokenizer pieces
//   parameters.bin      named parameter tensors
//   optimizer.bin       optimizer moments (training checkpoints only)
//   trainer_state.json  free-form training progress
struct Checkpoint {
  std::unique_ptr<FusionModel> model;
  Tokenizer tokenizer;
  Json trainer_state;
};

void save_checkpoint(const std::filesystem::path& dir, const FusionModel& model,
                     const Tokenizer& tokenizer, const Json& trainer_state = Json::object(),
                     const AdamW* optimizer = nullptr);

bool has_checkpoint(const std::filesystem::path& dir);

// Throws Error(kMissingPrerequisite) when the directory holds no checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Copies token-embedding and transformer tensors from a parameter file whose
// shapes match; romanization and fusion parameters keep their fresh values.
std::vector<std::string> import_backbone(FusionModel& model, const std::filesystem::path& parameters);

}  // namespace xhy::model
