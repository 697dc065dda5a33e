// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>

#include "xhy/eval/metrics.hpp"
#include "xhy/model/fusion_model.hpp"
#include "xhy/model/text_pipeline.hpp"

namespace xhy::eval {

// Fixed lookup table; unknown tokens are an error.
class TableEmbedder final : public TokenEmbedder {
 public:
  explicit TableEmbedder(std::unordered_map<std::string, Eigen::VectorXd> table);
  ag::Matrix embed(const Tokens& tokens) const override;

 private:
  std::unordered_map<std::string, Eigen::VectorXd> table_;
  Eigen::Index dim_ = 0;
};

// Context-free vectors: each token is the sum of per-character Gaussian
// vectors seeded from the character itself.
class HashedCharEmbedder final : public TokenEmbedder {
 public:
  explicit HashedCharEmbedder(int dim = 64, std::uint64_t seed = 0);
  ag::Matrix embed(const Tokens& tokens) const override;
  Eigen::VectorXd embed_text(std::string_view text) const;

 private:
  int dim_;
  std::uint64_t seed_;
};

// Encoder states of a trained model. The tokens are joined and encoded as one
// sentence; each token gets the mean of the subword states it overlaps.
class ModelEmbedder final : public TokenEmbedder {
 public:
  ModelEmbedder(const model::FusionModel& model, const model::TextPipeline& pipeline);
  ag::Matrix embed(const Tokens& tokens) const override;

 private:
  const model::FusionModel& model_;
  const model::TextPipeline& pipeline_;
};

// Whole-text vector for the learned scorer.
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual Eigen::VectorXd encode(std::string_view text) const = 0;
  virtual int dim() const = 0;
};

// Mean-pooled encoder output of a trained model.
class ModelSentenceEncoder final : public SentenceEncoder {
 public:
  ModelSentenceEncoder(const model::FusionModel& model, const model::TextPipeline& pipeline);
  Eigen::VectorXd encode(std::string_view text) const override;
  int dim() const override { return model_.config().d_model; }

 private:
  const model::FusionModel& model_;
  const model::TextPipeline& pipeline_;
};

// Mean of hashed character vectors; needs no checkpoint.
class HashedSentenceEncoder final : public SentenceEncoder {
 public:
  explicit HashedSentenceEncoder(int dim = 64, std::uint64_t seed = 0) : chars_(dim, seed), dim_(dim) {}
  Eigen::VectorXd encode(std::string_view text) const override;
  int dim() const override { return dim_; }

 private:
  HashedCharEmbedder chars_;
  int dim_;
};

}  // namespace xhy::eval
