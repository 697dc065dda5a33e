// SPDX-License-Identifier: Apache-2.0
#include "xhy/cli/commands.hpp"

#include <memory>
#include <optional>

#include <spdlog/spdlog.h>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"
#include "xhy/corpus/segmenter.hpp"
#include "xhy/corpus/subject.hpp"
#include "xhy/eval/embedders.hpp"
#include "xhy/eval/report.hpp"
#include "xhy/model/checkpoint.hpp"
#include "xhy/prompting/prompt.hpp"
#include "xhy/training/hard_negatives.hpp"

namespace xhy::cli {

namespace fs = std::filesystem;
using corpus::Task;

namespace {

constexpr const char* kSplits[] = {"train", "validation", "test"};

std::string task_name(Task task) { return std::string(corpus::to_string(task)); }

std::shared_ptr<const pinyin::Lexicon> load_lexicon(const RunConfig& config) {
  return std::make_shared<const pinyin::Lexicon>(pinyin::Lexicon::load(config.resolve(config.paths.lexicon)));
}

std::vector<corpus::AllegoricalSaying> load_part(const Workspace& ws, std::string_view split,
                                                 const pinyin::Lexicon& lexicon) {
  const auto path = ws.manifest(split);
  require(fs::exists(path), ErrorKind::kMissingPrerequisite,
          "split manifest " + path.string() + " is missing; run prepare first");
  return corpus::load_sayings(path, lexicon);
}

corpus::DatasetSplit load_split(const Workspace& ws, const pinyin::Lexicon& lexicon,
                                std::uint64_t seed) {
  corpus::DatasetSplit split;
  split.train = load_part(ws, "train", lexicon);
  split.validation = load_part(ws, "validation", lexicon);
  split.test = load_part(ws, "test", lexicon);
  split.seed = seed;
  return split;
}

std::vector<corpus::TaskExample> load_task_file(const fs::path& path) {
  require(fs::exists(path), ErrorKind::kMissingPrerequisite,
          "task file " + path.string() + " is missing; run prepare first");
  std::vector<corpus::TaskExample> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    if (!j.contains("input") || !j.contains("target")) {
      throw ParseError(path.string(), line, "task record needs input and target");
    }
    out.push_back({j["input"].get<std::string>(), j["target"].get<std::string>()});
  });
  return out;
}

model::Checkpoint require_stage(const Workspace& ws, int stage, Task task, int needed_by) {
  const auto dir = ws.stage_dir(stage, task);
  if (!model::has_checkpoint(dir)) {
    fail(ErrorKind::kMissingPrerequisite,
         (needed_by > 0 ? "stage " + std::to_string(needed_by) + " needs the stage " : std::string("needs the stage ")) +
             std::to_string(stage) + " checkpoint at " + dir.string() + "; run train --stage " +
             std::to_string(stage) + " first");
  }
  return model::load_checkpoint(dir);
}

// Latest checkpoint available for the task, newest stage first.
std::optional<fs::path> latest_checkpoint(const Workspace& ws, Task task) {
  for (int stage : {3, 2, 1}) {
    const auto dir = ws.stage_dir(stage, task);
    if (model::has_checkpoint(dir)) return dir;
  }
  return std::nullopt;
}

std::vector<std::string> stage1_corpus(const RunConfig& config,
                                       std::span<const corpus::AllegoricalSaying> train) {
  if (!config.paths.stage1_corpus.empty()) {
    std::vector<fs::path> files;
    for (const auto& p : config.paths.stage1_corpus) files.push_back(config.resolve(p));
    return training::read_corpus_lines(files);
  }
  std::vector<std::string> lines;
  for (const auto& s : train) lines.push_back(s.riddle + "——" + s.explanation);
  return lines;
}

void write_outputs(const fs::path& path, const std::vector<OrderedJson>& records) {
  fs::create_directories(path.parent_path());
  std::string text;
  for (const auto& r : records) text += r.dump() + "\n";
  write_text(path, text);
}

struct ScorerBundle {
  std::unique_ptr<eval::LearnedScorer> scorer;
  std::unique_ptr<eval::SentenceEncoder> encoder;
  std::optional<model::Checkpoint> checkpoint;
  std::unique_ptr<model::TextPipeline> pipeline;
};

ScorerBundle load_scorer(const Workspace& ws, const RunConfig& config) {
  ScorerBundle b;
  const auto dir = ws.scorer_dir();
  if (!fs::exists(dir / "encoder.json")) return b;
  const auto meta = Json::parse(read_text(dir / "encoder.json"));
  if (meta.at("encoder") == "hashed") {
    b.encoder = std::make_unique<eval::HashedSentenceEncoder>(meta.at("dim").get<int>(),
                                                              meta.at("seed").get<std::uint64_t>());
  } else {
    b.checkpoint = model::load_checkpoint(meta.at("checkpoint").get<std::string>());
    b.pipeline = std::make_unique<model::TextPipeline>(b.checkpoint->tokenizer, load_lexicon(config),
                                                       b.checkpoint->model->config().L_py);
    b.encoder = std::make_unique<eval::ModelSentenceEncoder>(*b.checkpoint->model, *b.pipeline);
  }
  b.scorer = std::make_unique<eval::LearnedScorer>(eval::LearnedScorer::load(dir));
  return b;
}

}  // namespace

fs::path Workspace::manifest(std::string_view split) const {
  return root_ / "data" / (std::string(split) + ".jsonl");
}

fs::path Workspace::task_file(Task task, std::string_view split) const {
  return root_ / "data" / (task_name(task) + "_" + std::string(split) + ".jsonl");
}

fs::path Workspace::stage_dir(int stage, Task task) const {
  if (stage == 3) return root_ / ("stage3_" + task_name(task));
  return root_ / ("stage" + std::to_string(stage));
}

fs::path Workspace::curve_log(int stage, Task task) const {
  if (stage == 3) return root_ / "logs" / ("stage3_" + task_name(task) + ".jsonl");
  return root_ / "logs" / ("stage" + std::to_string(stage) + ".jsonl");
}

fs::path Workspace::model_outputs(Task task) const {
  return root_ / "outputs" / (task_name(task) + "_model.jsonl");
}

fs::path Workspace::prompt_outputs(Task task, int shots) const {
  return root_ / "outputs" / (task_name(task) + "_prompt_" + std::to_string(shots) + "shot.jsonl");
}

fs::path Workspace::prompts(Task task, int shots) const {
  return root_ / "prompts" / (task_name(task) + "_" + std::to_string(shots) + "shot.jsonl");
}

fs::path Workspace::report(Task task, std::string_view source) const {
  return root_ / "reports" / (task_name(task) + "_" + std::string(source) + ".json");
}

OrderedJson cmd_prepare(const RunConfig& config) {
  const Workspace ws(config.work());
  const auto lexicon = load_lexicon(config);
  const auto segmenter = corpus::DictionarySegmenter::load(config.resolve(config.paths.words));
  auto sayings = corpus::load_sayings(config.resolve(config.paths.corpus), *lexicon);
  corpus::assign_subjects(sayings, segmenter);
  const auto split = corpus::split_dataset(sayings, config.split, derive_seed(config.seed, "split"));

  fs::create_directories(ws.root() / "data");
  const std::vector<corpus::AllegoricalSaying>* parts[] = {&split.train, &split.validation, &split.test};
  for (std::size_t i = 0; i < 3; ++i) {
    corpus::write_split_manifest(ws.manifest(kSplits[i]), *parts[i], kSplits[i], split.seed);
    for (Task task : {Task::kCompletion, Task::kScratch}) {
      std::string text;
      for (const auto& s : *parts[i]) {
        const auto ex = corpus::format_example(s, task);
        OrderedJson j;
        j["input"] = ex.input;
        j["target"] = ex.target;
        text += j.dump() + "\n";
      }
      write_text(ws.task_file(task, kSplits[i]), text);
    }
  }
  OrderedJson summary;
  summary["command"] = "prepare";
  summary["total"] = sayings.size();
  summary["train"] = split.train.size();
  summary["validation"] = split.validation.size();
  summary["test"] = split.test.size();
  summary["work"] = ws.root().string();
  return summary;
}

namespace {

OrderedJson train_stage1(const RunConfig& config, const Workspace& ws) {
  const auto lexicon = load_lexicon(config);
  const auto split = load_split(ws, *lexicon, config.seed);
  const auto lines = stage1_corpus(config, split.train);
  const auto dir = ws.stage_dir(1, config.task);
  training::StageOutputs outputs{dir, ws.curve_log(1, config.task)};

  OrderedJson summary;
  summary["command"] = "train";
  summary["stage"] = 1;

  training::Stage1Result result;
  if (model::has_checkpoint(dir)) {
    auto ckpt = model::load_checkpoint(dir);
    const auto step = ckpt.trainer_state.value("step", std::int64_t{0});
    const model::TextPipeline pipeline(ckpt.tokenizer, lexicon, ckpt.model->config().L_py);
    if (step >= config.stage1.steps) {
      summary["status"] = "complete";
      summary["step"] = step;
      return summary;
    }
    result = training::stage1_pretrain(*ckpt.model, pipeline, lines, config.stage1, outputs, dir);
    summary["resumed_from"] = step;
  } else {
    std::vector<std::string> texts = lines;
    for (Task task : {Task::kCompletion, Task::kScratch}) {
      for (const auto& s : split.train) {
        const auto ex = corpus::format_example(s, task);
        texts.push_back(ex.input);
        texts.push_back(ex.target);
      }
    }
    auto tokenizer = model::Tokenizer::train(texts, config.tokenizer);
    auto model_config = config.model;
    model_config.vocab_size = tokenizer.size();
    model::FusionModel model(model_config, derive_seed(config.seed, "model"));
    if (!config.paths.backbone.empty()) {
      const auto loaded = model::import_backbone(model, config.resolve(config.paths.backbone));
      summary["imported_tensors"] = loaded.size();
    }
    const model::TextPipeline pipeline(std::move(tokenizer), lexicon, model_config.L_py);
    result = training::stage1_pretrain(model, pipeline, lines, config.stage1, outputs);
    summary["vocab_size"] = model_config.vocab_size;
  }
  // negatives from an older stage-1 model are stale
  if (std::filesystem::remove(ws.hard_negative_cache())) summary["cleared_negatives"] = true;
  summary["status"] = "trained";
  summary["step"] = result.final_step;
  summary["lines"] = lines.size();
  if (!result.step_losses.empty()) {
    summary["first_loss"] = result.step_losses.front();
    summary["last_loss"] = result.step_losses.back();
  }
  summary["checkpoint"] = dir.string();
  return summary;
}

OrderedJson train_stage2(const RunConfig& config, const Workspace& ws) {
  const auto lexicon = load_lexicon(config);
  const auto train = load_part(ws, "train", *lexicon);
  auto ckpt = require_stage(ws, 1, config.task, 2);
  const model::TextPipeline pipeline(ckpt.tokenizer, lexicon, ckpt.model->config().L_py);

  std::vector<std::string> riddles;
  for (const auto& s : train) riddles.push_back(s.riddle);
  training::HardNegativeCache cache(ws.hard_negative_cache());
  const std::size_t cached = cache.size();
  const model::FusionModel& stage1_model = *ckpt.model;
  const training::Completer completer = [&](const std::string& riddle) {
    return pipeline.infill(stage1_model, riddle + "——");
  };
  const auto negatives = training::synthesize_hard_negatives(completer, riddles, cache);

  std::vector<training::ContrastivePair> pairs;
  for (std::size_t i = 0; i < train.size(); ++i) {
    pairs.push_back({train[i].riddle, train[i].explanation, negatives[i]});
  }
  const auto before = training::measure_similarity(*ckpt.model, pipeline, pairs);
  const auto result = training::stage2_contrast(*ckpt.model, pipeline, pairs, config.stage2,
                                                {ws.stage_dir(2, config.task), ws.curve_log(2, config.task)});
  const auto after = training::measure_similarity(*ckpt.model, pipeline, pairs);

  OrderedJson summary;
  summary["command"] = "train";
  summary["stage"] = 2;
  summary["pairs"] = pairs.size();
  summary["cached_negatives"] = cached;
  summary["epoch_losses"] = result.epoch_losses;
  summary["gap_before"] = before.positive - before.negative;
  summary["gap_after"] = after.positive - after.negative;
  summary["checkpoint"] = ws.stage_dir(2, config.task).string();
  return summary;
}

OrderedJson train_stage3(const RunConfig& config, const Workspace& ws) {
  const auto lexicon = load_lexicon(config);
  const auto split = load_split(ws, *lexicon, config.seed);
  auto ckpt = require_stage(ws, 2, config.task, 3);
  const model::TextPipeline pipeline(ckpt.tokenizer, lexicon, ckpt.model->config().L_py);
  const auto result = training::stage3_finetune(
      *ckpt.model, pipeline, split, config.stage3,
      {ws.stage_dir(3, config.task), ws.curve_log(3, config.task)});

  OrderedJson summary;
  summary["command"] = "train";
  summary["stage"] = 3;
  summary["task"] = task_name(config.task);
  summary["train_losses"] = result.train_losses;
  summary["validation_losses"] = result.validation_losses;
  summary["checkpoint"] = ws.stage_dir(3, config.task).string();
  return summary;
}

}  // namespace

OrderedJson cmd_train(const RunConfig& config, int stage) {
  const Workspace ws(config.work());
  switch (stage) {
    case 1: return train_stage1(config, ws);
    case 2: return train_stage2(config, ws);
    case 3: return train_stage3(config, ws);
    default: fail(ErrorKind::kConfig, "--stage must be 1, 2 or 3");
  }
}

OrderedJson cmd_generate(const RunConfig& config) {
  const Workspace ws(config.work());
  const auto examples = load_task_file(ws.task_file(config.task, "test"));
  auto ckpt = require_stage(ws, 3, config.task, 0);
  const model::TextPipeline pipeline(ckpt.tokenizer, load_lexicon(config), ckpt.model->config().L_py);

  std::vector<OrderedJson> records;
  std::size_t empty = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    model::DecodingOptions opts;
    opts.max_gen_len = config.generation.max_gen_len;
    if (config.generation.sampling) {
      opts.mode = model::DecodingOptions::Mode::kSampling;
      opts.temperature = config.generation.temperature;
      opts.seed = derive_seed(derive_seed(config.seed, "generate"), i);
    }
    const auto output = pipeline.generate(*ckpt.model, examples[i].input, opts);
    if (output.empty()) ++empty;
    OrderedJson r;
    r["index"] = i;
    r["input"] = examples[i].input;
    r["output"] = output;
    r["gold"] = examples[i].target;
    r["model"] = "fusion-stage3";
    records.push_back(std::move(r));
  }
  const auto path = ws.model_outputs(config.task);
  write_outputs(path, records);

  OrderedJson summary;
  summary["command"] = "generate";
  summary["task"] = task_name(config.task);
  summary["count"] = records.size();
  summary["empty"] = empty;
  summary["outputs"] = path.string();
  return summary;
}

OrderedJson cmd_prompt(const RunConfig& config, prompting::ChatClient* client) {
  const Workspace ws(config.work());
  const auto lexicon = load_lexicon(config);
  const auto train = load_part(ws, "train", *lexicon);
  const auto test = load_part(ws, "test", *lexicon);
  const auto examples = load_task_file(ws.task_file(config.task, "test"));
  require(examples.size() == test.size(), ErrorKind::kShapeMismatch,
          "test task file and manifest disagree; rerun prepare");
  const auto templates =
      prompting::TemplateSet::load(config.resolve(config.paths.templates), config.prompt.language);

  std::vector<std::string> prompts;
  std::vector<OrderedJson> prompt_records;
  for (std::size_t i = 0; i < test.size(); ++i) {
    prompting::PromptSpec spec;
    spec.task = config.task;
    spec.query = config.task == Task::kCompletion ? test[i].riddle : test[i].subject.value();
    spec.demos = prompting::sample_demos(train, static_cast<std::size_t>(config.prompt.shots),
                                         derive_seed(derive_seed(config.seed, "demos"), i));
    prompts.push_back(prompting::render_prompt(spec, templates));
    OrderedJson r;
    r["index"] = i;
    r["prompt"] = prompts.back();
    prompt_records.push_back(std::move(r));
  }
  write_outputs(ws.prompts(config.task, config.prompt.shots), prompt_records);

  std::optional<prompting::HttpChatClient> http;
  if (!client) {
    http.emplace(prompting::HttpChatClient::from_env());
    client = &*http;
  }
  prompting::CompletionParams params;
  params.temperature = config.prompt.temperature;
  params.max_tokens = config.prompt.max_tokens;
  prompting::RetryPolicy policy;
  policy.max_attempts = config.prompt.max_attempts;
  fs::create_directories(ws.audit_log().parent_path());
  prompting::AuditLog audit(ws.audit_log());
  const auto replies =
      prompting::complete_all(*client, prompts, params, policy, &audit, config.prompt.concurrency);

  std::vector<OrderedJson> records;
  for (std::size_t i = 0; i < replies.size(); ++i) {
    OrderedJson r;
    r["index"] = i;
    r["input"] = examples[i].input;
    r["output"] = prompting::clean_response(
        replies[i], config.task == Task::kCompletion ? std::string_view(test[i].riddle) : std::string_view());
    r["gold"] = examples[i].target;
    r["model"] = client->model_id();
    records.push_back(std::move(r));
  }
  const auto path = ws.prompt_outputs(config.task, config.prompt.shots);
  write_outputs(path, records);

  OrderedJson summary;
  summary["command"] = "prompt";
  summary["task"] = task_name(config.task);
  summary["shots"] = config.prompt.shots;
  summary["count"] = records.size();
  summary["outputs"] = path.string();
  return summary;
}

OrderedJson cmd_evaluate(const RunConfig& config) {
  const Workspace ws(config.work());
  const auto examples = load_task_file(ws.task_file(config.task, "test"));
  const auto path = config.metrics.outputs.empty() ? ws.model_outputs(config.task)
                                                   : config.resolve(config.metrics.outputs);
  require(fs::exists(path), ErrorKind::kMissingPrerequisite,
          "outputs file " + path.string() + " is missing; run generate or prompt first");

  std::vector<std::string> outputs, golds, inputs;
  std::string model_tag = "unknown";
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    const std::size_t i = outputs.size();
    if (i >= examples.size()) throw ParseError(path.string(), line, "more outputs than test inputs");
    if (!j.contains("output") || !j["output"].is_string()) {
      throw ParseError(path.string(), line, "record has no output string");
    }
    if (j.contains("input") && j["input"] != examples[i].input) {
      throw ParseError(path.string(), line, "input does not match test example " + std::to_string(i));
    }
    if (j.contains("model") && i == 0) model_tag = j["model"].get<std::string>();
    outputs.push_back(j["output"].get<std::string>());
    golds.push_back(examples[i].target);
    inputs.push_back(examples[i].input);
  });
  require(outputs.size() == examples.size(), ErrorKind::kShapeMismatch,
          "evaluate: " + std::to_string(outputs.size()) + " outputs for " +
              std::to_string(examples.size()) + " test inputs");

  eval::MetricConfig metric = config.metrics.metric;
  metric.segmenter = std::make_shared<const corpus::DictionarySegmenter>(
      corpus::DictionarySegmenter::load(config.resolve(config.paths.words)));

  const auto lexicon = load_lexicon(config);
  std::optional<model::Checkpoint> ckpt;
  std::unique_ptr<model::TextPipeline> pipeline;
  std::unique_ptr<eval::TokenEmbedder> embedder;
  std::string embedder_name = config.metrics.embedder;
  if (embedder_name == "model") {
    if (const auto dir = latest_checkpoint(ws, config.task)) {
      ckpt = model::load_checkpoint(*dir);
      pipeline = std::make_unique<model::TextPipeline>(ckpt->tokenizer, lexicon, ckpt->model->config().L_py);
      embedder = std::make_unique<eval::ModelEmbedder>(*ckpt->model, *pipeline);
    } else {
      spdlog::warn("no checkpoint for bertscore; using hashed character vectors");
      embedder_name = "hashed";
    }
  }
  if (!embedder) {
    embedder = std::make_unique<eval::HashedCharEmbedder>(64, derive_seed(config.seed, "embedder"));
  }
  auto scorer = load_scorer(ws, config);

  eval::EvaluationContext ctx;
  ctx.model = model_tag;
  ctx.embedder = embedder.get();
  ctx.scorer = scorer.scorer.get();
  ctx.encoder = scorer.encoder.get();
  ctx.bertscore_mode = config.metrics.bertscore_f1 ? eval::BertScoreMode::kF1 : eval::BertScoreMode::kPrecision;
  const auto report = eval::evaluate_task(outputs, golds, config.task, metric, ctx, inputs);
  const auto report_path = ws.report(config.task, path.stem().string());
  report.save(report_path);

  OrderedJson summary;
  summary["command"] = "evaluate";
  summary["task"] = task_name(config.task);
  summary["count"] = report.samples.size();
  summary["embedder"] = embedder_name;
  summary["means"] = report.to_json()["means"];
  summary["report"] = report_path.string();
  return summary;
}

OrderedJson cmd_score(const RunConfig& config) {
  require(!config.paths.annotations.empty(), ErrorKind::kConfig,
          "paths.annotations is not set; the score command needs an annotation file");
  const Workspace ws(config.work());
  const auto annotations = eval::load_annotations(config.resolve(config.paths.annotations));

  OrderedJson encoder_meta;
  std::optional<model::Checkpoint> ckpt;
  std::unique_ptr<model::TextPipeline> pipeline;
  std::unique_ptr<eval::SentenceEncoder> encoder;
  if (config.score.encoder == "model") {
    const auto dir = latest_checkpoint(ws, config.task);
    require(dir.has_value(), ErrorKind::kMissingPrerequisite,
            "score.encoder is model but no checkpoint exists; train stage 1 first or use hashed");
    ckpt = model::load_checkpoint(*dir);
    pipeline = std::make_unique<model::TextPipeline>(ckpt->tokenizer, load_lexicon(config),
                                                     ckpt->model->config().L_py);
    encoder = std::make_unique<eval::ModelSentenceEncoder>(*ckpt->model, *pipeline);
    encoder_meta["encoder"] = "model";
    encoder_meta["checkpoint"] = fs::absolute(*dir).string();
  } else {
    const auto seed = derive_seed(config.seed, "sentence-encoder");
    encoder = std::make_unique<eval::HashedSentenceEncoder>(config.score.hashed_dim, seed);
    encoder_meta["encoder"] = "hashed";
    encoder_meta["dim"] = config.score.hashed_dim;
    encoder_meta["seed"] = seed;
  }

  eval::LearnedScorer scorer(encoder->dim(), config.score.scorer);
  const auto losses = scorer.train(annotations, *encoder);
  scorer.save(ws.scorer_dir());
  write_text(ws.scorer_dir() / "encoder.json", encoder_meta.dump(2) + "\n");

  OrderedJson summary;
  summary["command"] = "score";
  summary["annotations"] = annotations.size();
  summary["encoder"] = encoder_meta["encoder"];
  summary["initial_mse"] = losses.front();
  summary["final_mse"] = losses.back();
  summary["scorer"] = ws.scorer_dir().string();
  return summary;
}

}  // namespace xhy::cli
