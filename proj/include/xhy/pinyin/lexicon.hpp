// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xhy::pinyin {

// "lè" -> "le", "lǜ" -> "lv", "yue4" -> "yue". Output is lowercase a-z only.
std::string strip_tone(std::string_view reading);

// Character and word readings. File format, UTF-8, one entry per line:
//   key<TAB>reading[,reading...]
// A single-character key lists that character's readings, default first.
// A multi-character key lists whole-word readings with space-separated
// syllables; only the first is used. Tone marks are stripped on load.
class Lexicon {
 public:
  static Lexicon load(const std::filesystem::path& path);
  static Lexicon parse(std::string_view text, std::string_view source = "<memory>");

  // Tone-stripped readings of a character, default first; nullptr if absent.
  const std::vector<std::string>* readings(char32_t ch) const;

  // Context-aware reading of context[position]: the longest lexicon word
  // covering the position wins (leftmost on ties), else the default reading.
  // nullopt when the character is not in the lexicon.
  std::optional<std::string> romanize(std::u32string_view context, std::size_t position) const;
  // Convenience: romanize the first occurrence of ch inside context (or ch
  // alone when it does not occur there).
  std::optional<std::string> romanize(std::string_view ch, std::string_view context) const;

  // Reading the two characters share, preferring a's default; nullopt if none.
  std::optional<std::string> shared_reading(char32_t a, char32_t b) const;
  // Homophone predicate on tone-stripped readings. Symmetric and reflexive.
  bool same_pinyin(char32_t a, char32_t b) const;

  std::size_t char_count() const { return chars_.size(); }
  std::size_t word_count() const { return words_.size(); }

 private:
  std::unordered_map<char32_t, std::vector<std::string>> chars_;
  std::unordered_map<std::u32string, std::vector<std::string>> words_;
  std::size_t max_word_length_ = 1;
};

}  // namespace xhy::pinyin
