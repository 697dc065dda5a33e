// SPDX-License-Identifier: Apache-2.0
#include "xhy/model/fusion_model.hpp"

#include <cmath>
#include <limits>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"
#include "xhy/model/tokenizer.hpp"

namespace xhy::model {

using ag::Matrix;
using ag::Var;

namespace {

constexpr double kMasked = -1e9;

std::vector<std::uint8_t> full_mask(std::size_t n, std::span<const std::uint8_t> mask) {
  if (!mask.empty()) return {mask.begin(), mask.end()};
  return std::vector<std::uint8_t>(n, 1);
}

// [queries, keys] additive mask blocking padded keys.
Matrix key_mask(Eigen::Index queries, std::span<const std::uint8_t> keys) {
  Matrix m = Matrix::Zero(queries, static_cast<Eigen::Index>(keys.size()));
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (!keys[k]) m.col(static_cast<Eigen::Index>(k)).setConstant(kMasked);
  }
  return m;
}

Matrix causal_mask(Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = kMasked;
  }
  return m;
}

std::string layer(const char* side, int i) { return std::string(side) + ".layer" + std::to_string(i) + "."; }

}  // namespace

struct FusionModel::ForwardState {
  const ForwardOptions& options;
  std::uint64_t counter = 0;
};

Matrix sinusoidal_positions(Eigen::Index positions, Eigen::Index d_model) {
  Matrix pe(positions, d_model);
  for (Eigen::Index pos = 0; pos < positions; ++pos) {
    for (Eigen::Index i = 0; i < d_model; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d_model);
      pe(pos, i) = i % 2 == 0 ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

FusionModel::FusionModel(FusionModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int d = config_.d_model;
  auto std = [&](int fan_in) {
    return config_.fan_in_init ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : config_.init_std;
  };
  auto attn = [&](const std::string& prefix) {
    for (const char* w : {"q", "k", "v", "o"}) params_.create_normal(prefix + w, d, d, std(d), rng);
  };
  params_.create_normal("token_embedding", config_.vocab_size, d, std(1), rng);
  params_.create_normal("pinyin.symbol_embedding", config_.pinyin_alphabet_size,
                        config_.pinyin_dim, std(1), rng);
  params_.create_normal("pinyin.conv.weight", config_.conv_kernel * config_.pinyin_dim,
                        config_.conv_filters, std(config_.conv_kernel * config_.pinyin_dim), rng);
  params_.create_constant("pinyin.conv.bias", 1, config_.conv_filters, 0.0);
  attn("fusion.");
  for (int i = 0; i < config_.n_enc_layers; ++i) {
    const auto pre = layer("encoder", i);
    params_.create_constant(pre + "attn_norm", 1, d, 1.0);
    attn(pre + "attn.");
    params_.create_constant(pre + "ffn_norm", 1, d, 1.0);
    params_.create_normal(pre + "ffn.wi", d, config_.d_ff, std(d), rng);
    params_.create_normal(pre + "ffn.wo", config_.d_ff, d, std(config_.d_ff), rng);
  }
  params_.create_constant("encoder.final_norm", 1, d, 1.0);
  for (int i = 0; i < config_.n_dec_layers; ++i) {
    const auto pre = layer("decoder", i);
    params_.create_constant(pre + "self_norm", 1, d, 1.0);
    attn(pre + "self_attn.");
    params_.create_constant(pre + "cross_norm", 1, d, 1.0);
    attn(pre + "cross_attn.");
    params_.create_constant(pre + "ffn_norm", 1, d, 1.0);
    params_.create_normal(pre + "ffn.wi", d, config_.d_ff, std(d), rng);
    params_.create_normal(pre + "ffn.wo", config_.d_ff, d, std(config_.d_ff), rng);
  }
  params_.create_constant("decoder.final_norm", 1, d, 1.0);
  params_.create_normal("lm_head", d, config_.vocab_size, std(d), rng);
}

Var FusionModel::token_embed(std::span<const int> ids) const {
  return ag::gather_rows(p("token_embedding"), ids);
}

Var FusionModel::pinyin_embed(std::span<const pinyin::PinyinSequence> sequences) const {
  const int len = config_.L_py;
  require(!sequences.empty(), ErrorKind::kInvalidArgument, "pinyin_embed: no sequences");
  // Window pairs (t, t+1) for every token, flattened token-major.
  std::vector<int> left, right;
  left.reserve(sequences.size() * (len - 1));
  right.reserve(sequences.size() * (len - 1));
  for (const auto& seq : sequences) {
    require(static_cast<int>(seq.symbols.size()) == len, ErrorKind::kShapeMismatch,
            "pinyin sequence for '" + seq.token_text + "' has length " +
                std::to_string(seq.symbols.size()) + ", expected " + std::to_string(len));
    for (int t = 0; t < len; ++t) {
      const int s = static_cast<int>(seq.symbols[t]);
      require(s >= 0 && s < config_.pinyin_alphabet_size, ErrorKind::kInvalidArgument,
              "pinyin symbol " + std::to_string(s) + " outside the alphabet");
      if (t + 1 < len) left.push_back(s);
      if (t > 0) right.push_back(s);
    }
  }
  const Var& table = p("pinyin.symbol_embedding");
  const std::vector<Var> window = {ag::gather_rows(table, left), ag::gather_rows(table, right)};
  const Var conv = ag::add_row(ag::matmul(ag::concat_cols(window), p("pinyin.conv.weight")),
                               p("pinyin.conv.bias"));
  return ag::group_max_rows(conv, len - 1);
}

Var FusionModel::attention(const std::string& prefix, const Var& query, const Var& key_value,
                           const Matrix& mask) const {
  const Var q = ag::matmul(query, p(prefix + "q"));
  const Var k = ag::matmul(key_value, p(prefix + "k"));
  const Var v = ag::matmul(key_value, p(prefix + "v"));
  const int heads = config_.n_heads;
  const int dh = config_.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Var qh = ag::slice_cols(q, h * dh, dh);
    const Var kh = ag::slice_cols(k, h * dh, dh);
    const Var vh = ag::slice_cols(v, h * dh, dh);
    const Var weights = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), scale), mask);
    outputs.push_back(ag::matmul(weights, vh));
  }
  const Var merged = heads == 1 ? outputs.front() : ag::concat_cols(outputs);
  return ag::matmul(merged, p(prefix + "o"));
}

Var FusionModel::feed_forward(const std::string& prefix, const Var& x) const {
  return ag::matmul(ag::gelu(ag::matmul(x, p(prefix + "wi"))), p(prefix + "wo"));
}

Var FusionModel::maybe_dropout(const Var& x, ForwardState& state) const {
  if (!state.options.train || config_.dropout == 0.0) return x;
  return ag::dropout(x, config_.dropout, derive_seed(state.options.dropout_seed, state.counter++));
}

Var FusionModel::fuse(const Var& e_pinyin, const Var& e_token,
                      std::span<const std::uint8_t> mask) const {
  require(e_pinyin.rows() == e_token.rows() && e_pinyin.cols() == e_token.cols(),
          ErrorKind::kShapeMismatch, "fuse: e_pinyin and e_token shapes differ");
  require(mask.empty() || static_cast<Eigen::Index>(mask.size()) == e_token.rows(),
          ErrorKind::kShapeMismatch, "fuse: mask length differs from sequence length");
  const auto keys = full_mask(static_cast<std::size_t>(e_token.rows()), mask);
  return attention("fusion.", e_pinyin, e_token, key_mask(e_pinyin.rows(), keys));
}

void FusionModel::check_input(const EncoderInput& input) const {
  require(!input.ids.empty(), ErrorKind::kInvalidArgument, "encoder input is empty");
  require(input.ids.size() == input.pinyin.size(), ErrorKind::kShapeMismatch,
          "encoder input has " + std::to_string(input.ids.size()) + " tokens but " +
              std::to_string(input.pinyin.size()) + " pinyin sequences");
  require(input.mask.empty() || input.mask.size() == input.ids.size(), ErrorKind::kShapeMismatch,
          "encoder mask length differs from token count");
  for (int id : input.ids) {
    require(id >= 0 && id < config_.vocab_size, ErrorKind::kInvalidArgument,
            "token id " + std::to_string(id) + " outside the vocabulary");
  }
}

Var FusionModel::encode(const EncoderInput& input, const ForwardOptions& options) const {
  check_input(input);
  ForwardState state{options};
  const auto n = static_cast<Eigen::Index>(input.ids.size());
  const auto mask = full_mask(input.ids.size(), input.mask);
  const Var fused = fuse(pinyin_embed(input.pinyin), token_embed(input.ids), mask);
  Var h = maybe_dropout(ag::add_const(fused, sinusoidal_positions(n, config_.d_model)), state);
  const Matrix self_mask = key_mask(n, mask);
  for (int i = 0; i < config_.n_enc_layers; ++i) {
    const auto pre = layer("encoder", i);
    const Var normed = ag::rms_norm(h, p(pre + "attn_norm"));
    h = ag::add(h, maybe_dropout(attention(pre + "attn.", normed, normed, self_mask), state));
    h = ag::add(h, maybe_dropout(feed_forward(pre + "ffn.", ag::rms_norm(h, p(pre + "ffn_norm"))),
                                 state));
  }
  return ag::rms_norm(h, p("encoder.final_norm"));
}

Var FusionModel::pool(const Var& hidden, std::span<const std::uint8_t> mask) {
  const auto m = full_mask(static_cast<std::size_t>(hidden.rows()), mask);
  return ag::masked_mean_rows(hidden, m);
}

Var FusionModel::decode_logits(const Var& encoder_hidden, std::span<const std::uint8_t> encoder_mask,
                               std::span<const int> decoder_ids, const ForwardOptions& options) const {
  require(!decoder_ids.empty(), ErrorKind::kInvalidArgument, "decoder input is empty");
  ForwardState state{options};
  // Distinct dropout stream from the encoder's.
  state.counter = 1u << 20;
  const auto n = static_cast<Eigen::Index>(decoder_ids.size());
  const auto enc_mask = full_mask(static_cast<std::size_t>(encoder_hidden.rows()), encoder_mask);
  Var h = maybe_dropout(
      ag::add_const(token_embed(decoder_ids), sinusoidal_positions(n, config_.d_model)), state);
  const Matrix self_mask = causal_mask(n);
  const Matrix cross_mask = key_mask(n, enc_mask);
  for (int i = 0; i < config_.n_dec_layers; ++i) {
    const auto pre = layer("decoder", i);
    const Var normed = ag::rms_norm(h, p(pre + "self_norm"));
    h = ag::add(h, maybe_dropout(attention(pre + "self_attn.", normed, normed, self_mask), state));
    h = ag::add(h, maybe_dropout(attention(pre + "cross_attn.", ag::rms_norm(h, p(pre + "cross_norm")),
                                           encoder_hidden, cross_mask),
                                 state));
    h = ag::add(h, maybe_dropout(feed_forward(pre + "ffn.", ag::rms_norm(h, p(pre + "ffn_norm"))),
                                 state));
  }
  return ag::matmul(ag::rms_norm(h, p("decoder.final_norm")), p("lm_head"));
}

Var FusionModel::loss(const EncoderInput& input, std::span<const int> target,
                      const ForwardOptions& options) const {
  require(!target.empty(), ErrorKind::kInvalidArgument, "target is empty");
  const Var hidden = encode(input, options);
  std::vector<int> decoder_ids;
  decoder_ids.reserve(target.size());
  decoder_ids.push_back(Tokenizer::kPad);
  decoder_ids.insert(decoder_ids.end(), target.begin(), target.end() - 1);
  return ag::cross_entropy(decode_logits(hidden, input.mask, decoder_ids, options), target);
}

std::vector<int> FusionModel::generate(const EncoderInput& input,
                                       const DecodingOptions& options) const {
  ag::NoGradGuard guard;
  const int budget = options.max_gen_len > 0 ? options.max_gen_len : config_.max_gen_len;
  const Var hidden = encode(input);
  Rng rng(options.seed);
  // Specials other than </s> are never emitted: pad, unk and the sentinels.
  std::vector<int> blocked = {Tokenizer::kPad, Tokenizer::kUnk};
  if (!options.stop_at_sentinel) {
    for (int k = 0; k < config_.num_sentinels; ++k) blocked.push_back(Tokenizer::kFirstSentinel + k);
  }
  const auto is_sentinel = [&](int id) {
    return id >= Tokenizer::kFirstSentinel && id < Tokenizer::kFirstSentinel + config_.num_sentinels;
  };
  std::vector<int> decoder_ids = {Tokenizer::kPad};
  for (int id : options.prefix) {
    require(id >= 0 && id < config_.vocab_size, ErrorKind::kInvalidArgument, "prefix id out of range");
    decoder_ids.push_back(id);
  }
  std::vector<int> out;
  while (static_cast<int>(out.size()) < budget) {
    const Var logits = decode_logits(hidden, input.mask, decoder_ids);
    Eigen::RowVectorXd row = logits.value().row(logits.rows() - 1);
    for (int id : blocked) row(id) = -std::numeric_limits<double>::infinity();
    int next = 0;
    if (options.mode == DecodingOptions::Mode::kGreedy) {
      row.maxCoeff(&next);
    } else {
      require(options.temperature > 0.0, ErrorKind::kInvalidArgument,
              "sampling temperature must be positive");
      const Eigen::RowVectorXd z = (row.array() - row.maxCoeff()) / options.temperature;
      const Eigen::RowVectorXd probs = z.array().exp() / z.array().exp().sum();
      double u = rng.uniform();
      next = static_cast<int>(probs.size()) - 1;
      for (Eigen::Index i = 0; i < probs.size(); ++i) {
        u -= probs(i);
        if (u < 0.0) {
          next = static_cast<int>(i);
          break;
        }
      }
    }
    if (next == Tokenizer::kEos || (options.stop_at_sentinel && is_sentinel(next))) break;
    out.push_back(next);
    decoder_ids.push_back(next);
  }
  return out;
}

std::vector<std::string> FusionModel::decoder_parameter_names() const {
  std::vector<std::string> out;
  for (const auto& name : params_.names()) {
    if (name.starts_with("decoder.") || name == "lm_head") out.push_back(name);
  }
  return out;
}

std::vector<std::string> FusionModel::non_decoder_parameter_names() const {
  std::vector<std::string> out;
  for (const auto& name : params_.names()) {
    if (!name.starts_with("decoder.") && name != "lm_head") out.push_back(name);
  }
  return out;
}

bool FusionModel::is_pinyin_parameter(std::string_view name) {
  return name.starts_with("pinyin.") || name.starts_with("fusion.");
}

}  // namespace xhy::model
