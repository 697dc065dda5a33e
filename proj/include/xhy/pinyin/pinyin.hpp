// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xhy/pinyin/lexicon.hpp"

namespace xhy::pinyin {

// Romanization alphabet fed to the Pinyin embedding: pad, a no-pinyin
// placeholder, the syllable separator, then the 26 letters.
enum class Symbol : std::uint8_t { kPad = 0, kNone = 1, kSeparator = 2, kFirstLetter = 3 };

inline constexpr int kAlphabetSize = 29;
inline constexpr int kDefaultLength = 12;

Symbol letter_symbol(char c);
// '_' pad, '#' placeholder, '|' separator, letters as themselves.
char symbol_char(Symbol s);

struct PinyinSequence {
  std::vector<Symbol> symbols;  // always exactly the configured length
  std::string token_text;

  // Rendering without padding, e.g. "dou|fu".
  std::string str() const;
  std::vector<int> ids() const;
  bool operator==(const PinyinSequence&) const = default;
};

// Romanization of context[begin, end). Chinese characters contribute one
// syllable each, joined by the separator; other characters are skipped. A span
// with no Chinese characters yields the single placeholder. Truncated from the
// right, then padded, to `length` symbols.
PinyinSequence token_pinyin(const Lexicon& lexicon, std::u32string_view context,
                            std::size_t begin, std::size_t end, int length = kDefaultLength);

// Token text looked up at its first occurrence in context (or standalone).
PinyinSequence token_pinyin(const Lexicon& lexicon, std::string_view token,
                            std::string_view context, int length = kDefaultLength);

// One sequence per token, positionally aligned. Token texts are located in
// the context left to right; tokens absent from it (sentinels, <unk>) are
// romanized standalone.
std::vector<PinyinSequence> align(const Lexicon& lexicon, std::span<const int> token_ids,
                                  std::span<const std::string> token_texts,
                                  std::string_view context, int length = kDefaultLength);

// Placeholder-only sequence for special tokens.
PinyinSequence placeholder(std::string token_text, int length = kDefaultLength);

}  // namespace xhy::pinyin
