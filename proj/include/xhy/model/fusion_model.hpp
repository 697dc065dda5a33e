// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xhy/core/autograd.hpp"
#include "xhy/core/parameters.hpp"
#include "xhy/model/config.hpp"
#include "xhy/pinyin/pinyin.hpp"

namespace xhy::model {

// One encoder-side sentence. mask[i] == 0 marks padding; an empty mask means
// every position is real.
struct EncoderInput {
  std::vector<int> ids;
  std::vector<pinyin::PinyinSequence> pinyin;
  std::vector<std::uint8_t> mask;
};

struct ForwardOptions {
  bool train = false;  // enables dropout
  std::uint64_t dropout_seed = 0;
};

struct DecodingOptions {
  enum class Mode { kGreedy, kSampling };
  Mode mode = Mode::kGreedy;
  int max_gen_len = 0;  // 0 uses the model config
  double temperature = 1.0;
  std::uint64_t seed = 0;
  // Forced decoder ids after the start symbol; not part of the output.
  std::vector<int> prefix;
  // Sentinels end the output instead of being suppressed.
  bool stop_at_sentinel = false;
};

// Encoder-decoder transformer whose encoder input fuses romanization and token
// embeddings: e_fusion = MultiHead(Q = e_pinyin, K = V = e_token), plus fixed
// sinusoidal positions. Pre-norm layers with RMSNorm and a GELU feed-forward.
// The decoder reads plain token embeddings (shared table) and projects through
// an untied output matrix.
//
// Tensors are per sentence, [positions, d_model]; callers batch by looping.
class FusionModel {
 public:
  FusionModel(FusionModelConfig config, std::uint64_t seed);

  const FusionModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  ag::Var token_embed(std::span<const int> ids) const;
  // Symbol embedding, width-2 convolution, max-pool over positions: [tokens, d_model].
  ag::Var pinyin_embed(std::span<const pinyin::PinyinSequence> sequences) const;
  // Multi-head attention with the romanization embedding as query and the
  // token embedding as key and value; padded keys are masked out.
  ag::Var fuse(const ag::Var& e_pinyin, const ag::Var& e_token,
               std::span<const std::uint8_t> mask = {}) const;
  ag::Var encode(const EncoderInput& input, const ForwardOptions& options = {}) const;
  // Mean of the non-padding rows.
  static ag::Var pool(const ag::Var& hidden, std::span<const std::uint8_t> mask = {});

  // Teacher-forced logits [decoder_ids, vocab] given encoder states.
  ag::Var decode_logits(const ag::Var& encoder_hidden, std::span<const std::uint8_t> encoder_mask,
                        std::span<const int> decoder_ids, const ForwardOptions& options = {}) const;
  // Mean cross-entropy of target (which should end with </s>); the decoder is
  // fed the target shifted right behind the <pad> start symbol.
  ag::Var loss(const EncoderInput& input, std::span<const int> target,
               const ForwardOptions& options = {}) const;

  // Output ids without the start symbol or </s>. Special tokens other than
  // </s> are never emitted.
  std::vector<int> generate(const EncoderInput& input, const DecodingOptions& options = {}) const;

  // Parameters read only by the decoder side (decoder stack and output
  // projection). The shared token embedding is not among them.
  std::vector<std::string> decoder_parameter_names() const;
  std::vector<std::string> non_decoder_parameter_names() const;
  // Romanization-path parameters (symbol embedding, convolution, fusion attention).
  static bool is_pinyin_parameter(std::string_view name);

 private:
  struct ForwardState;
  ag::Var attention(const std::string& prefix, const ag::Var& query, const ag::Var& key_value,
                    const ag::Matrix& mask) const;
  ag::Var feed_forward(const std::string& prefix, const ag::Var& x) const;
  ag::Var maybe_dropout(const ag::Var& x, ForwardState& state) const;
  const ag::Var& p(const std::string& name) const { return params_.at(name); }
  void check_input(const EncoderInput& input) const;

  FusionModelConfig config_;
  ParameterStore params_;
};

// Sinusoidal position table [positions, d_model].
ag::Matrix sinusoidal_positions(Eigen::Index positions, Eigen::Index d_model);

}  // namespace xhy::model
