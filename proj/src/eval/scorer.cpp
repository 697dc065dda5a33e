// SPDX-License-Identifier: Apache-2.0
#include "xhy/eval/scorer.hpp"

#include <algorithm>
#include <cmath>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"

namespace xhy::eval {

namespace {

void check_vote(int v, const std::string& what) {
  require(v >= 1 && v <= 3, ErrorKind::kInvalidArgument,
          what + " vote " + std::to_string(v) + " is outside 1..3");
}

std::array<int, 2> votes(const Json& j, const char* key) {
  require(j.contains(key) && j[key].is_array() && j[key].size() == 2, ErrorKind::kInvalidArgument,
          std::string(key) + " needs two annotator scores");
  std::array<int, 2> out{};
  for (std::size_t i = 0; i < 2; ++i) {
    require(j[key][i].is_number_integer(), ErrorKind::kInvalidArgument,
            std::string(key) + " scores must be integers");
    out[i] = j[key][i].get<int>();
  }
  return out;
}

}  // namespace

AnnotationRecord make_annotation(std::string text, std::array<int, 2> coherency,
                                 std::array<int, 2> humor) {
  for (int v : coherency) check_vote(v, "coherency");
  for (int v : humor) check_vote(v, "humor");
  AnnotationRecord r;
  r.text = std::move(text);
  r.coherency_votes = coherency;
  r.humor_votes = humor;
  r.coherency = (coherency[0] + coherency[1]) / 2.0;
  r.humor = (humor[0] + humor[1]) / 2.0;
  return r;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    try {
      require(j.contains("text") && j["text"].is_string(), ErrorKind::kInvalidArgument,
              "missing text");
      out.push_back(make_annotation(j["text"].get<std::string>(), votes(j, "coherency"),
                                    votes(j, "humor")));
    } catch (const Error& e) {
      throw ParseError(path.string(), line, e.what());
    }
  });
  return out;
}

LearnedScorer::LearnedScorer(int input_dim, ScorerConfig config)
    : input_dim_(input_dim), config_(config) {
  require(input_dim > 0 && config.hidden > 0, ErrorKind::kConfig, "scorer widths must be positive");
  Rng rng(derive_seed(config.seed, "scorer"));
  params_.create_normal("head.hidden.weight", input_dim, config.hidden,
                        1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  params_.create_constant("head.hidden.bias", 1, config.hidden, 0.0);
  params_.create_normal("head.out.weight", config.hidden, 2,
                        1.0 / std::sqrt(static_cast<double>(config.hidden)), rng);
  // start at the middle of the scale
  params_.create_constant("head.out.bias", 1, 2, 2.0);
}

ag::Var LearnedScorer::forward(const Eigen::VectorXd& features) const {
  require(features.size() == input_dim_, ErrorKind::kShapeMismatch, "scorer input width");
  const ag::Var x(ag::Matrix(features.transpose()));
  const auto h = ag::gelu(ag::add_row(ag::matmul(x, params_.at("head.hidden.weight")),
                                      params_.at("head.hidden.bias")));
  return ag::add_row(ag::matmul(h, params_.at("head.out.weight")), params_.at("head.out.bias"));
}

double LearnedScorer::mse(std::span<const AnnotationRecord> annotations,
                          const SentenceEncoder& encoder) const {
  ag::NoGradGuard guard;
  double total = 0.0;
  for (const auto& a : annotations) {
    const auto y = forward(encoder.encode(a.text)).value();
    total += (std::pow(y(0, 0) - a.coherency, 2) + std::pow(y(0, 1) - a.humor, 2)) / 2.0;
  }
  return total / static_cast<double>(annotations.size());
}

std::vector<double> LearnedScorer::train(std::span<const AnnotationRecord> annotations,
                                         const SentenceEncoder& encoder) {
  require(annotations.size() >= 2, ErrorKind::kInvalidArgument, "scorer needs at least 2 annotations");
  require(encoder.dim() == input_dim_, ErrorKind::kShapeMismatch, "encoder width differs from scorer");
  std::vector<Eigen::VectorXd> features;
  std::vector<ag::Matrix> targets;
  for (const auto& a : annotations) {
    require(a.coherency >= kMinScore && a.coherency <= kMaxScore && a.humor >= kMinScore &&
                a.humor <= kMaxScore,
            ErrorKind::kInvalidArgument, "annotation score outside [1, 3]");
    features.push_back(encoder.encode(a.text));
    ag::Matrix t(1, 2);
    t << a.coherency, a.humor;
    targets.push_back(t);
  }

  AdamW optimizer(params_, params_.names(), config_.optimizer);
  std::vector<double> losses;
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (int epoch = 0; epoch <= config_.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      auto loss = ag::scale(ag::mse(forward(features[i]), targets[i]), inv_n);
      total += loss.item();
      if (epoch < config_.epochs) loss.backward();
    }
    losses.push_back(total);
    if (epoch < config_.epochs) optimizer.step();
  }
  return losses;
}

Scores LearnedScorer::predict(const Eigen::VectorXd& features) const {
  ag::NoGradGuard guard;
  const auto y = forward(features).value();
  return {std::clamp(y(0, 0), kMinScore, kMaxScore), std::clamp(y(0, 1), kMinScore, kMaxScore)};
}

Scores LearnedScorer::predict(std::string_view text, const SentenceEncoder& encoder) const {
  return predict(encoder.encode(text));
}

void LearnedScorer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  OrderedJson meta;
  meta["input_dim"] = input_dim_;
  meta["hidden"] = config_.hidden;
  write_text(dir / "scorer.json", meta.dump(2) + "\n");
  params_.save(dir / "scorer.bin");
}

LearnedScorer LearnedScorer::load(const std::filesystem::path& dir) {
  require(std::filesystem::exists(dir / "scorer.json"), ErrorKind::kMissingPrerequisite,
          "no scorer at " + dir.string());
  const auto meta = Json::parse(read_text(dir / "scorer.json"));
  ScorerConfig config;
  config.hidden = meta.at("hidden").get<int>();
  LearnedScorer scorer(meta.at("input_dim").get<int>(), config);
  const auto loaded = scorer.params_.load(dir / "scorer.bin");
  require(loaded.size() == scorer.params_.size(), ErrorKind::kParse, "scorer parameters incomplete");
  return scorer;
}

}  // namespace xhy::eval
