// SPDX-License-Identifier: Apache-2.0
#include "xhy/model/text_pipeline.hpp"

#include "xhy/core/error.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::model {

TextPipeline::TextPipeline(Tokenizer tokenizer, std::shared_ptr<const pinyin::Lexicon> lexicon,
                           int pinyin_length)
    : tokenizer_(std::move(tokenizer)), lexicon_(std::move(lexicon)), pinyin_length_(pinyin_length) {
  require(lexicon_ != nullptr, ErrorKind::kInvalidArgument, "text pipeline needs a lexicon");
}

TokenizedText TextPipeline::tokenize(std::string_view text) const {
  TokenizedText out;
  out.ids = tokenizer_.encode(text);
  out.pieces = tokenizer_.pieces(out.ids);
  out.pinyin = pinyin::align(*lexicon_, out.ids, out.pieces, text, pinyin_length_);
  return out;
}

pinyin::PinyinSequence TextPipeline::special_pinyin(int id) const {
  return pinyin::placeholder(tokenizer_.piece(id), pinyin_length_);
}

EncoderInput TextPipeline::encoder_input(const TokenizedText& tokens) const {
  EncoderInput in;
  in.ids = tokens.ids;
  in.pinyin = tokens.pinyin;
  in.ids.push_back(Tokenizer::kEos);
  in.pinyin.push_back(special_pinyin(Tokenizer::kEos));
  return in;
}

EncoderInput TextPipeline::encoder_input(std::string_view text) const {
  return encoder_input(tokenize(text));
}

std::vector<int> TextPipeline::target_ids(std::string_view text) const {
  auto ids = tokenizer_.encode(text);
  ids.push_back(Tokenizer::kEos);
  return ids;
}

std::string TextPipeline::generate(const FusionModel& model, std::string_view input,
                                   const DecodingOptions& options) const {
  require(!utf8::trim(input).empty(), ErrorKind::kInvalidArgument, "generation input is empty");
  const auto ids = model.generate(encoder_input(input), options);
  return tokenizer_.decode(ids);
}

std::string TextPipeline::infill(const FusionModel& model, std::string_view text,
                                 const DecodingOptions& options) const {
  require(!utf8::trim(text).empty(), ErrorKind::kInvalidArgument, "infill input is empty");
  require(tokenizer_.num_sentinels() > 0, ErrorKind::kConfig, "infill needs a sentinel token");
  const int sentinel = tokenizer_.sentinel(0);
  auto tokens = tokenize(text);
  tokens.ids.push_back(sentinel);
  tokens.pieces.push_back(tokenizer_.piece(sentinel));
  tokens.pinyin.push_back(special_pinyin(sentinel));
  DecodingOptions opts = options;
  opts.prefix = {sentinel};
  opts.stop_at_sentinel = true;
  return tokenizer_.decode(model.generate(encoder_input(tokens), opts));
}

}  // namespace xhy::model
