// SPDX-License-Identifier: Apache-2.0
#include "xhy/eval/embedders.hpp"

#include <algorithm>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"
#include "xhy/core/utf8.hpp"
#include "xhy/model/tokenizer.hpp"

namespace xhy::eval {

TableEmbedder::TableEmbedder(std::unordered_map<std::string, Eigen::VectorXd> table)
    : table_(std::move(table)) {
  require(!table_.empty(), ErrorKind::kInvalidArgument, "empty embedding table");
  dim_ = table_.begin()->second.size();
  for (const auto& [token, v] : table_) {
    require(v.size() == dim_, ErrorKind::kShapeMismatch, "embedding table rows differ in width");
  }
}

ag::Matrix TableEmbedder::embed(const Tokens& tokens) const {
  ag::Matrix out(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto it = table_.find(tokens[i]);
    require(it != table_.end(), ErrorKind::kInvalidArgument, "no embedding for token " + tokens[i]);
    out.row(static_cast<Eigen::Index>(i)) = it->second.transpose();
  }
  return out;
}

HashedCharEmbedder::HashedCharEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  require(dim > 0, ErrorKind::kInvalidArgument, "embedding width must be positive");
}

Eigen::VectorXd HashedCharEmbedder::embed_text(std::string_view text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  for (const auto& c : utf8::chars(text)) {
    Rng rng(derive_seed(seed_, c));
    for (int k = 0; k < dim_; ++k) v(k) += rng.normal();
  }
  return v;
}

ag::Matrix HashedCharEmbedder::embed(const Tokens& tokens) const {
  ag::Matrix out(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = embed_text(tokens[i]).transpose();
  }
  return out;
}

ModelEmbedder::ModelEmbedder(const model::FusionModel& model, const model::TextPipeline& pipeline)
    : model_(model), pipeline_(pipeline) {}

ag::Matrix ModelEmbedder::embed(const Tokens& tokens) const {
  std::string joined;
  std::vector<std::size_t> word_end;
  std::size_t chars = 0;
  for (const auto& t : tokens) {
    joined += t;
    chars += utf8::decode(t).size();
    word_end.push_back(chars);
  }
  const auto tokenized = pipeline_.tokenize(joined);
  require(!tokenized.ids.empty(), ErrorKind::kInvalidArgument, "nothing to embed");

  ag::Matrix hidden;
  {
    ag::NoGradGuard guard;
    hidden = model_.encode(pipeline_.encoder_input(tokenized)).value();
  }

  // character span of every piece
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < tokenized.ids.size(); ++i) {
    const std::size_t len = tokenized.ids[i] == model::Tokenizer::kUnk
                                ? 1
                                : utf8::decode(tokenized.pieces[i]).size();
    spans.emplace_back(pos, pos + len);
    pos += len;
  }

  const int d = model_.config().d_model;
  ag::Matrix out = ag::Matrix::Zero(static_cast<Eigen::Index>(tokens.size()), d);
  std::size_t start = 0;
  for (std::size_t w = 0; w < tokens.size(); ++w) {
    const std::size_t end = word_end[w];
    int count = 0;
    for (std::size_t p = 0; p < spans.size(); ++p) {
      if (spans[p].first < end && start < spans[p].second) {
        out.row(static_cast<Eigen::Index>(w)) += hidden.row(static_cast<Eigen::Index>(p));
        ++count;
      }
    }
    if (count > 0) out.row(static_cast<Eigen::Index>(w)) /= count;
    start = end;
  }
  return out;
}

ModelSentenceEncoder::ModelSentenceEncoder(const model::FusionModel& model,
                                           const model::TextPipeline& pipeline)
    : model_(model), pipeline_(pipeline) {}

Eigen::VectorXd ModelSentenceEncoder::encode(std::string_view text) const {
  ag::NoGradGuard guard;
  const auto input = pipeline_.encoder_input(text);
  const auto pooled = model::FusionModel::pool(model_.encode(input), input.mask);
  return pooled.value().row(0).transpose();
}

Eigen::VectorXd HashedSentenceEncoder::encode(std::string_view text) const {
  const auto n = std::max<std::size_t>(1, utf8::chars(text).size());
  return chars_.embed_text(text) / static_cast<double>(n);
}

}  // namespace xhy::eval
