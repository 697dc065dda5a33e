// SPDX-License-Identifier: Apache-2.0
#include "xhy/pinyin/lexicon.hpp"

#include <sstream>

#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::pinyin {
namespace {

char base_letter(char32_t cp) {
  if (cp >= U'a' && cp <= U'z') return static_cast<char>(cp);
  if (cp >= U'A' && cp <= U'Z') return static_cast<char>(cp - U'A' + U'a');
  switch (cp) {
    case U'ā': case U'á': case U'ǎ': case U'à': return 'a';
    case U'ē': case U'é': case U'ě': case U'è': case U'ế': case U'ề': case U'ê': return 'e';
    case U'ī': case U'í': case U'ǐ': case U'ì': return 'i';
    case U'ō': case U'ó': case U'ǒ': case U'ò': return 'o';
    case U'ū': case U'ú': case U'ǔ': case U'ù': return 'u';
    case U'ü': case U'ǖ': case U'ǘ': case U'ǚ': case U'ǜ': return 'v';
    case U'ń': case U'ň': case U'ǹ': return 'n';
    case U'ḿ': return 'm';
    default: return '\0';
  }
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(sep, start);
    const auto piece = text.substr(start, end == std::string_view::npos ? end : end - start);
    if (!utf8::trim(piece).empty()) out.emplace_back(utf8::trim(piece));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

std::string strip_tone(std::string_view reading) {
  std::string out;
  for (char32_t cp : utf8::decode(reading)) {
    // Combining diacritics (U+0300..U+036F) are dropped along with tone digits.
    const char c = base_letter(cp);
    if (c != '\0') out.push_back(c);
  }
  return out;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  return parse(read_text(path), path.string());
}

Lexicon Lexicon::parse(std::string_view text, std::string_view source) {
  Lexicon lex;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (utf8::trim(line).empty() || line.starts_with('#')) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError(std::string(source), line_no, "expected key<TAB>readings");
    }
    const std::u32string key = utf8::decode(utf8::trim(line.substr(0, tab)));
    const auto readings = split(line.substr(tab + 1), ',');
    if (key.empty() || readings.empty()) {
      throw ParseError(std::string(source), line_no, "empty key or reading list");
    }
    if (key.size() == 1) {
      auto& slot = lex.chars_[key[0]];
      for (const auto& r : readings) {
        std::string stripped = strip_tone(r);
        if (stripped.empty()) continue;
        bool seen = false;
        for (const auto& s : slot) seen = seen || s == stripped;
        if (!seen) slot.push_back(std::move(stripped));
      }
    } else {
      std::vector<std::string> syllables;
      std::istringstream in(readings.front());
      for (std::string syl; in >> syl;) syllables.push_back(strip_tone(syl));
      if (syllables.size() != key.size()) {
        throw ParseError(std::string(source), line_no,
                         "word reading has a different syllable count than characters");
      }
      lex.words_[key] = std::move(syllables);
      lex.max_word_length_ = std::max(lex.max_word_length_, key.size());
    }
  }
  return lex;
}

const std::vector<std::string>* Lexicon::readings(char32_t ch) const {
  auto it = chars_.find(ch);
  return it == chars_.end() || it->second.empty() ? nullptr : &it->second;
}

std::optional<std::string> Lexicon::romanize(std::u32string_view context,
                                             std::size_t position) const {
  require(position < context.size(), ErrorKind::kInvalidArgument,
          "romanize: position outside context");
  const auto* defaults = readings(context[position]);
  if (defaults == nullptr) return std::nullopt;

  for (std::size_t len = std::min(max_word_length_, context.size()); len >= 2; --len) {
    const std::size_t first = position + 1 >= len ? position + 1 - len : 0;
    for (std::size_t s = first; s <= position && s + len <= context.size(); ++s) {
      auto it = words_.find(std::u32string(context.substr(s, len)));
      if (it != words_.end()) return it->second[position - s];
    }
  }
  return defaults->front();
}

std::optional<std::string> Lexicon::romanize(std::string_view ch, std::string_view context) const {
  const std::u32string c = utf8::decode(ch);
  require(c.size() == 1, ErrorKind::kInvalidArgument, "romanize expects a single character");
  std::u32string ctx = utf8::decode(context);
  auto pos = ctx.find(c[0]);
  if (pos == std::u32string::npos) {
    ctx = c;
    pos = 0;
  }
  return romanize(ctx, pos);
}

std::optional<std::string> Lexicon::shared_reading(char32_t a, char32_t b) const {
  const auto* ra = readings(a);
  const auto* rb = readings(b);
  if (ra == nullptr || rb == nullptr) return std::nullopt;
  for (const auto& x : *ra) {
    for (const auto& y : *rb) {
      if (x == y) return x;
    }
  }
  return std::nullopt;
}

bool Lexicon::same_pinyin(char32_t a, char32_t b) const {
  if (a == b) return true;
  return shared_reading(a, b).has_value();
}

}  // namespace xhy::pinyin
