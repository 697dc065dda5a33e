// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xhy/core/io.hpp"
#include "xhy/core/parameters.hpp"
#include "xhy/eval/embedders.hpp"

namespace xhy::eval {

// Ratings run from 1 (low) to 3 (high).
inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 3.0;

struct AnnotationRecord {
  std::string text;
  double coherency = 0.0;  // mean of the two annotators
  double humor = 0.0;
  std::array<int, 2> coherency_votes{};
  std::array<int, 2> humor_votes{};
};

// Each vote must be an integer in [1, 3].
AnnotationRecord make_annotation(std::string text, std::array<int, 2> coherency,
                                 std::array<int, 2> humor);

// One JSON object per line: {"text": ..., "coherency": [a, b], "humor": [a, b]}.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

struct ScorerConfig {
  int hidden = 32;
  int epochs = 200;
  AdamWConfig optimizer{.lr = 1e-2, .weight_decay = 0.0, .clip_norm = 0.0};
  std::uint64_t seed = 0;
};

struct Scores {
  double coherency = 0.0;
  double humor = 0.0;
};

// Two regression heads (coherency, humor) over a frozen sentence encoder,
// sharing one GELU hidden layer.
class LearnedScorer {
 public:
  LearnedScorer(int input_dim, ScorerConfig config = {});

  // Full-batch MSE training; returns the loss before each epoch and the
  // final loss, so the vector has epochs + 1 entries.
  std::vector<double> train(std::span<const AnnotationRecord> annotations,
                            const SentenceEncoder& encoder);
  double mse(std::span<const AnnotationRecord> annotations, const SentenceEncoder& encoder) const;

  // Clamped to [1, 3].
  Scores predict(const Eigen::VectorXd& features) const;
  Scores predict(std::string_view text, const SentenceEncoder& encoder) const;

  int input_dim() const { return input_dim_; }
  void save(const std::filesystem::path& dir) const;
  static LearnedScorer load(const std::filesystem::path& dir);

 private:
  ag::Var forward(const Eigen::VectorXd& features) const;

  int input_dim_;
  ScorerConfig config_;
  ParameterStore params_;
};

}  // namespace xhy::eval
