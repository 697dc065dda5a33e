// SPDX-License-Identifier: Apache-2.0
#include "xhy/training/stages.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/core/utf8.hpp"
#include "xhy/model/checkpoint.hpp"
#include "xhy/training/contrastive.hpp"

namespace xhy::training {

using model::EncoderInput;
using model::FusionModel;
using model::TextPipeline;
using model::Tokenizer;

namespace {

class CurveLog {
 public:
  CurveLog(std::filesystem::path path, bool truncate) : path_(std::move(path)) {
    if (!path_.empty() && truncate) write_text(path_, "");
  }
  void write(const OrderedJson& record) const {
    if (!path_.empty()) append_line(path_, record.dump());
  }

 private:
  std::filesystem::path path_;
};

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<std::string> read_corpus_lines(std::span<const std::filesystem::path> paths) {
  std::vector<std::string> lines;
  for (const auto& path : paths) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::kIo, "cannot read corpus " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      const auto trimmed = utf8::trim(line);
      if (!trimmed.empty()) lines.emplace_back(trimmed);
    }
  }
  return lines;
}

Stage1Result stage1_pretrain(FusionModel& model, const TextPipeline& pipeline,
                             std::span<const std::string> corpus, const Stage1Config& config,
                             const StageOutputs& outputs,
                             const std::optional<std::filesystem::path>& resume_from) {
  require(config.batch_size >= 1, ErrorKind::kConfig, "stage 1 batch_size must be >= 1");
  SpanCorruptionConfig span = config.span;
  span.first_sentinel = Tokenizer::kFirstSentinel;
  require(span.sentinel_budget <= pipeline.tokenizer().num_sentinels(), ErrorKind::kConfig,
          "sentinel_budget exceeds the tokenizer's sentinel count");
  span.validate();

  std::vector<model::TokenizedText> texts;
  for (const auto& line : corpus) {
    auto t = pipeline.tokenize(line);
    if (t.ids.size() >= 2) texts.push_back(std::move(t));
  }
  require(!texts.empty(), ErrorKind::kInvalidArgument, "stage 1 corpus is empty");

  AdamW optimizer(model.parameters(), model.parameters().names(), config.optimizer);
  std::int64_t start = 0;
  if (resume_from) {
    model.parameters().load(*resume_from / "parameters.bin");
    optimizer.load(*resume_from / "optimizer.bin");
    start = optimizer.steps_taken();
    spdlog::info("stage 1 resuming at step {}", start);
  }
  const CurveLog log(outputs.curve_log, !resume_from);
  const auto eos_pinyin = pipeline.special_pinyin(Tokenizer::kEos);
  const double inv_batch = 1.0 / config.batch_size;

  auto save = [&](std::int64_t step) {
    if (outputs.checkpoint_dir.empty()) return;
    model::save_checkpoint(outputs.checkpoint_dir, model, pipeline.tokenizer(),
                           Json{{"stage", 1}, {"step", step}, {"seed", config.seed}}, &optimizer);
  };

  Stage1Result result;
  for (std::int64_t step = start; step < config.steps; ++step) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(step)));
    double total = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& text = texts[rng.uniform_index(texts.size())];
      const auto corrupted = make_span_corruption(text.ids, span, rng);
      EncoderInput input;
      input.ids = corrupted.input;
      std::size_t source = 0;
      for (int id : corrupted.input) {
        if (id >= span.first_sentinel && id < span.first_sentinel + span.sentinel_budget) {
          input.pinyin.push_back(pipeline.special_pinyin(id));
          while (source < text.ids.size() && corrupted.noise_mask[source]) ++source;
        } else {
          input.pinyin.push_back(text.pinyin[source++]);
        }
      }
      input.ids.push_back(Tokenizer::kEos);
      input.pinyin.push_back(eos_pinyin);
      auto target = corrupted.target;
      target.push_back(Tokenizer::kEos);
      const auto loss = model.loss(input, target, {true, rng.next_u64()});
      total += loss.item();
      ag::scale(loss, inv_batch).backward();
    }
    optimizer.step();
    const double batch_loss = total * inv_batch;
    result.step_losses.push_back(batch_loss);
    if (config.log_every > 0 && (step + 1) % config.log_every == 0) {
      OrderedJson record;
      record["stage"] = 1;
      record["step"] = step + 1;
      record["loss"] = batch_loss;
      record["lr"] = scheduled_lr(config.optimizer, step);
      log.write(record);
    }
    if (config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) save(step + 1);
  }
  result.final_step = std::max<std::int64_t>(start, config.steps);
  if (config.checkpoint_every <= 0 || result.final_step % config.checkpoint_every != 0) {
    save(result.final_step);
  }
  if (!result.step_losses.empty()) {
    spdlog::info("stage 1: {} steps, loss {:.4f} -> {:.4f}", result.step_losses.size(),
                 result.step_losses.front(), result.step_losses.back());
  }
  return result;
}

namespace {

ag::Var pooled(const FusionModel& model, const EncoderInput& input, const model::ForwardOptions& o) {
  return FusionModel::pool(model.encode(input, o), input.mask);
}

struct EncodedPair {
  EncoderInput riddle, explanation, negative;
};

std::vector<EncodedPair> encode_pairs(const TextPipeline& pipeline,
                                      std::span<const ContrastivePair> pairs) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({pipeline.encoder_input(p.riddle), pipeline.encoder_input(p.explanation),
                   pipeline.encoder_input(p.hard_negative)});
  }
  return out;
}

}  // namespace

Stage2Result stage2_contrast(FusionModel& model, const TextPipeline& pipeline,
                             std::span<const ContrastivePair> pairs, const Stage2Config& config,
                             const StageOutputs& outputs) {
  require(config.batch_size >= 2, ErrorKind::kConfig,
          "stage 2 batch_size must be >= 2 so each anchor has in-batch negatives");
  require(pairs.size() >= 2, ErrorKind::kInvalidArgument, "stage 2 needs at least 2 pairs");
  require(config.tau > 0.0, ErrorKind::kConfig, "stage 2 tau must be positive");
  const auto encoded = encode_pairs(pipeline, pairs);
  AdamW optimizer(model.parameters(), model.non_decoder_parameter_names(), config.optimizer);
  const CurveLog log(outputs.curve_log, true);

  Stage2Result result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    auto batches = make_batches(encoded.size(), config.batch_size, rng);
    if (batches.size() > 1 && batches.back().size() < 2) {
      auto tail = batches.back();
      batches.pop_back();
      batches.back().insert(batches.back().end(), tail.begin(), tail.end());
    }
    std::vector<double> losses;
    for (const auto& batch : batches) {
      std::vector<ag::Var> r, e, c;
      for (auto i : batch) {
        r.push_back(pooled(model, encoded[i].riddle, {true, rng.next_u64()}));
        e.push_back(pooled(model, encoded[i].explanation, {true, rng.next_u64()}));
        c.push_back(pooled(model, encoded[i].negative, {true, rng.next_u64()}));
      }
      const auto loss =
          contrastive_loss(ag::concat_rows(r), ag::concat_rows(e), ag::concat_rows(c), config.tau);
      losses.push_back(loss.item());
      loss.backward();
      optimizer.step();
    }
    // The decoder never receives gradient here, but clear any strays so later
    // stages start clean.
    for (const auto& name : model.decoder_parameter_names()) model.parameters().at(name).zero_grad();
    result.epoch_losses.push_back(mean(losses));
    OrderedJson record;
    record["stage"] = 2;
    record["epoch"] = epoch + 1;
    record["loss"] = result.epoch_losses.back();
    log.write(record);
    spdlog::info("stage 2 epoch {}: loss {:.4f}", epoch + 1, result.epoch_losses.back());
  }
  if (!outputs.checkpoint_dir.empty()) {
    model::save_checkpoint(outputs.checkpoint_dir, model, pipeline.tokenizer(),
                           Json{{"stage", 2}, {"epochs", config.epochs}, {"seed", config.seed}});
  }
  return result;
}

SimilarityGap measure_similarity(const FusionModel& model, const TextPipeline& pipeline,
                                 std::span<const ContrastivePair> pairs) {
  require(!pairs.empty(), ErrorKind::kInvalidArgument, "no pairs to measure");
  ag::NoGradGuard guard;
  SimilarityGap gap;
  for (const auto& p : encode_pairs(pipeline, pairs)) {
    const Eigen::VectorXd r = pooled(model, p.riddle, {}).value().row(0).transpose();
    const Eigen::VectorXd e = pooled(model, p.explanation, {}).value().row(0).transpose();
    const Eigen::VectorXd c = pooled(model, p.negative, {}).value().row(0).transpose();
    gap.positive += cosine(r, e);
    gap.negative += cosine(r, c);
  }
  gap.positive /= static_cast<double>(pairs.size());
  gap.negative /= static_cast<double>(pairs.size());
  return gap;
}

namespace {

struct EncodedExample {
  EncoderInput input;
  std::vector<int> target;
};

std::vector<EncodedExample> encode_examples(const TextPipeline& pipeline,
                                            std::span<const corpus::TaskExample> examples) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({pipeline.encoder_input(ex.input), pipeline.target_ids(ex.target)});
  }
  return out;
}

std::vector<corpus::TaskExample> format_all(std::span<const corpus::AllegoricalSaying> sayings,
                                            corpus::Task task) {
  std::vector<corpus::TaskExample> out;
  out.reserve(sayings.size());
  for (const auto& s : sayings) out.push_back(corpus::format_example(s, task));
  return out;
}

}  // namespace

double evaluation_loss(const FusionModel& model, const TextPipeline& pipeline,
                       std::span<const corpus::TaskExample> examples) {
  require(!examples.empty(), ErrorKind::kInvalidArgument, "no examples to evaluate");
  ag::NoGradGuard guard;
  double total = 0.0;
  for (const auto& ex : encode_examples(pipeline, examples)) {
    total += model.loss(ex.input, ex.target).item();
  }
  return total / static_cast<double>(examples.size());
}

Stage3Result stage3_finetune(FusionModel& model, const TextPipeline& pipeline,
                             const corpus::DatasetSplit& split, const Stage3Config& config,
                             const StageOutputs& outputs) {
  require(config.batch_size >= 1, ErrorKind::kConfig, "stage 3 batch_size must be >= 1");
  require(!split.train.empty(), ErrorKind::kInvalidArgument, "stage 3 training split is empty");
  const auto train = encode_examples(pipeline, format_all(split.train, config.task));
  const auto validation = format_all(split.validation, config.task);
  AdamW optimizer(model.parameters(), model.parameters().names(), config.optimizer);
  const CurveLog log(outputs.curve_log, true);

  Stage3Result result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    double total = 0.0;
    for (const auto& batch : make_batches(train.size(), config.batch_size, rng)) {
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (auto i : batch) {
        const auto loss = model.loss(train[i].input, train[i].target, {true, rng.next_u64()});
        total += loss.item();
        ag::scale(loss, inv).backward();
      }
      optimizer.step();
    }
    result.train_losses.push_back(total / static_cast<double>(train.size()));
    OrderedJson record;
    record["stage"] = 3;
    record["task"] = std::string(corpus::to_string(config.task));
    record["epoch"] = epoch + 1;
    record["train_loss"] = result.train_losses.back();
    if (!validation.empty()) {
      result.validation_losses.push_back(evaluation_loss(model, pipeline, validation));
      record["validation_loss"] = result.validation_losses.back();
    }
    log.write(record);
    spdlog::info("stage 3 epoch {}: train {:.4f} validation {:.4f}", epoch + 1,
                 result.train_losses.back(),
                 result.validation_losses.empty() ? 0.0 : result.validation_losses.back());
  }
  if (!outputs.checkpoint_dir.empty()) {
    model::save_checkpoint(outputs.checkpoint_dir, model, pipeline.tokenizer(),
                           Json{{"stage", 3},
                                {"task", std::string(corpus::to_string(config.task))},
                                {"epochs", config.epochs},
                                {"seed", config.seed}});
  }
  return result;
}

}  // namespace xhy::training
