// SPDX-License-Identifier: Apache-2.0
#include "xhy/pinyin/pinyin.hpp"

#include "xhy/core/error.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::pinyin {

Symbol letter_symbol(char c) {
  require(c >= 'a' && c <= 'z', ErrorKind::kInvalidArgument,
          std::string("not a romanization letter: ") + c);
  return static_cast<Symbol>(static_cast<int>(Symbol::kFirstLetter) + (c - 'a'));
}

char symbol_char(Symbol s) {
  switch (s) {
    case Symbol::kPad: return '_';
    case Symbol::kNone: return '#';
    case Symbol::kSeparator: return '|';
    default: return static_cast<char>('a' + (static_cast<int>(s) - static_cast<int>(Symbol::kFirstLetter)));
  }
}

std::string PinyinSequence::str() const {
  std::string out;
  for (Symbol s : symbols) {
    if (s != Symbol::kPad) out.push_back(symbol_char(s));
  }
  return out;
}

std::vector<int> PinyinSequence::ids() const {
  std::vector<int> out;
  out.reserve(symbols.size());
  for (Symbol s : symbols) out.push_back(static_cast<int>(s));
  return out;
}

PinyinSequence placeholder(std::string token_text, int length) {
  require(length > 0, ErrorKind::kInvalidArgument, "romanization length must be positive");
  PinyinSequence seq;
  seq.token_text = std::move(token_text);
  seq.symbols.assign(static_cast<std::size_t>(length), Symbol::kPad);
  seq.symbols[0] = Symbol::kNone;
  return seq;
}

PinyinSequence token_pinyin(const Lexicon& lexicon, std::u32string_view context,
                            std::size_t begin, std::size_t end, int length) {
  require(begin <= end && end <= context.size(), ErrorKind::kInvalidArgument,
          "token_pinyin: span outside context");
  const std::string text = utf8::encode(context.substr(begin, end - begin));
  PinyinSequence seq = placeholder(text, length);

  std::vector<Symbol> raw;
  bool any_chinese = false;
  for (std::size_t i = begin; i < end; ++i) {
    if (!utf8::is_cjk(context[i])) continue;
    if (any_chinese) raw.push_back(Symbol::kSeparator);
    any_chinese = true;
    const auto reading = lexicon.romanize(context, i);
    if (!reading || reading->empty()) {
      raw.push_back(Symbol::kNone);
      continue;
    }
    for (char c : *reading) raw.push_back(letter_symbol(c));
  }
  if (!any_chinese) return seq;

  seq.symbols.assign(static_cast<std::size_t>(length), Symbol::kPad);
  for (std::size_t i = 0; i < raw.size() && i < seq.symbols.size(); ++i) seq.symbols[i] = raw[i];
  return seq;
}

PinyinSequence token_pinyin(const Lexicon& lexicon, std::string_view token,
                            std::string_view context, int length) {
  const std::u32string tok = utf8::decode(token);
  std::u32string ctx = utf8::decode(context);
  auto pos = tok.empty() ? std::u32string::npos : ctx.find(tok);
  if (pos == std::u32string::npos) {
    ctx = tok;
    pos = 0;
  }
  return token_pinyin(lexicon, ctx, pos, pos + tok.size(), length);
}

std::vector<PinyinSequence> align(const Lexicon& lexicon, std::span<const int> token_ids,
                                  std::span<const std::string> token_texts,
                                  std::string_view context, int length) {
  if (token_ids.size() != token_texts.size()) {
    fail(ErrorKind::kShapeMismatch, "align: " + std::to_string(token_ids.size()) +
                                        " ids but " + std::to_string(token_texts.size()) +
                                        " token texts");
  }
  const std::u32string ctx = utf8::decode(context);
  std::vector<PinyinSequence> out;
  out.reserve(token_texts.size());
  std::size_t cursor = 0;
  for (const auto& text : token_texts) {
    const std::u32string tok = utf8::decode(text);
    const auto pos = tok.empty() ? std::u32string::npos : ctx.find(tok, cursor);
    if (pos == std::u32string::npos) {
      out.push_back(token_pinyin(lexicon, tok, 0, tok.size(), length));
      out.back().token_text = text;
      continue;
    }
    out.push_back(token_pinyin(lexicon, ctx, pos, pos + tok.size(), length));
    cursor = pos + tok.size();
  }
  return out;
}

}  // namespace xhy::pinyin
