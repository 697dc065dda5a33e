// SPDX-License-Identifier: Apache-2.0
#include "xhy/core/utf8.hpp"

#include <boost/locale/encoding_utf.hpp>

namespace xhy::utf8 {

std::u32string decode(std::string_view text) {
  return boost::locale::conv::utf_to_utf<char32_t>(text.data(),
                                                   text.data() + text.size());
}

std::string encode(std::u32string_view text) {
  return boost::locale::conv::utf_to_utf<char>(text.data(),
                                               text.data() + text.size());
}

std::string encode(char32_t cp) { return encode(std::u32string_view(&cp, 1)); }

std::vector<std::string> chars(std::string_view text) {
  std::vector<std::string> out;
  for (char32_t cp : decode(text)) out.push_back(encode(cp));
  return out;
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
         (cp >= 0x20000 && cp <= 0x323AF) || (cp >= 0xF900 && cp <= 0xFAFF);
}

bool contains_cjk(std::string_view text) {
  for (char32_t cp : decode(text)) {
    if (is_cjk(cp)) return true;
  }
  return false;
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  // Full-width space (U+3000) is common in scraped Chinese text.
  constexpr std::string_view kIdeographicSpace = "\xE3\x80\x80";
  for (bool changed = true; changed;) {
    changed = false;
    if (!text.empty() && kSpace.find(text.front()) != std::string_view::npos) {
      text.remove_prefix(1);
      changed = true;
    } else if (text.starts_with(kIdeographicSpace)) {
      text.remove_prefix(kIdeographicSpace.size());
      changed = true;
    }
    if (!text.empty() && kSpace.find(text.back()) != std::string_view::npos) {
      text.remove_suffix(1);
      changed = true;
    } else if (text.ends_with(kIdeographicSpace)) {
      text.remove_suffix(kIdeographicSpace.size());
      changed = true;
    }
  }
  return text;
}

}  // namespace xhy::utf8
