// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "xhy/model/fusion_model.hpp"
#include "xhy/model/tokenizer.hpp"
#include "xhy/pinyin/lexicon.hpp"

namespace xhy::model {

struct TokenizedText {
  std::vector<int> ids;
  std::vector<std::string> pieces;
  std::vector<pinyin::PinyinSequence> pinyin;  // aligned with ids
};

// Text <-> model inputs: subword tokenization plus per-token romanization
// resolved against the full sentence.
class TextPipeline {
 public:
  TextPipeline(Tokenizer tokenizer, std::shared_ptr<const pinyin::Lexicon> lexicon,
               int pinyin_length = pinyin::kDefaultLength);

  TokenizedText tokenize(std::string_view text) const;
  // Tokens followed by </s>.
  EncoderInput encoder_input(std::string_view text) const;
  EncoderInput encoder_input(const TokenizedText& tokens) const;
  // Ids followed by </s>.
  std::vector<int> target_ids(std::string_view text) const;
  pinyin::PinyinSequence special_pinyin(int id) const;

  // Throws Error(kInvalidArgument) on empty or whitespace-only input.
  std::string generate(const FusionModel& model, std::string_view input,
                       const DecodingOptions& options = {}) const;

  // Continues text the way span-corruption pretraining fills a gap: the
  // encoder sees text followed by the first sentinel, the decoder is forced
  // to open with that sentinel, and output stops at the next one.
  std::string infill(const FusionModel& model, std::string_view text,
                     const DecodingOptions& options = {}) const;

  const Tokenizer& tokenizer() const { return tokenizer_; }
  const pinyin::Lexicon& lexicon() const { return *lexicon_; }
  std::shared_ptr<const pinyin::Lexicon> shared_lexicon() const { return lexicon_; }
  int pinyin_length() const { return pinyin_length_; }

 private:
  Tokenizer tokenizer_;
  std::shared_ptr<const pinyin::Lexicon> lexicon_;
  int pinyin_length_;
};

}  // namespace xhy::model
