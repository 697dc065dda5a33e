// SPDX-License-Identifier: Apache-2.0
#include "xhy/model/checkpoint.hpp"

#include "xhy/core/error.hpp"
#include "xhy/model/config.hpp"

namespace xhy::model {

void save_checkpoint(const std::filesystem::path& dir, const FusionModel& model,
                     const Tokenizer& tokenizer, const Json& trainer_state, const AdamW* optimizer) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", to_json(model.config()).dump(2) + "\n");
  tokenizer.save(dir / "tokenizer.tsv");
  model.parameters().save(dir / "parameters.bin");
  if (optimizer) optimizer->save(dir / "optimizer.bin");
  write_text(dir / "trainer_state.json", trainer_state.dump(2) + "\n");
}

bool has_checkpoint(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / "config.json") &&
         std::filesystem::exists(dir / "parameters.bin") &&
         std::filesystem::exists(dir / "tokenizer.tsv");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  require(has_checkpoint(dir), ErrorKind::kMissingPrerequisite,
          "no checkpoint in " + dir.string());
  Json config_json;
  try {
    config_json = Json::parse(read_text(dir / "config.json"));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kParse, (dir / "config.json").string() + ": " + e.what());
  }
  Checkpoint ck{std::make_unique<FusionModel>(config_from_json(config_json), 0),
                Tokenizer::load(dir / "tokenizer.tsv"), Json::object()};
  require(ck.tokenizer.size() == ck.model->config().vocab_size, ErrorKind::kShapeMismatch,
          "tokenizer size differs from the configured vocab_size");
  const auto loaded = ck.model->parameters().load(dir / "parameters.bin");
  require(loaded.size() == ck.model->parameters().size(), ErrorKind::kParse,
          (dir / "parameters.bin").string() + " is missing tensors");
  if (std::filesystem::exists(dir / "trainer_state.json")) {
    ck.trainer_state = Json::parse(read_text(dir / "trainer_state.json"));
  }
  return ck;
}

std::vector<std::string> import_backbone(FusionModel& model, const std::filesystem::path& parameters) {
  return model.parameters().load(
      parameters, [](std::string_view name) { return !FusionModel::is_pinyin_parameter(name); });
}

}  // namespace xhy::model
