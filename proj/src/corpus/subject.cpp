// SPDX-License-Identifier: Apache-2.0
#include <map>

#include "xhy/core/error.hpp"
#include "xhy/core/utf8.hpp"
#include "xhy/corpus/saying.hpp"
#include "xhy/corpus/subject.hpp"

namespace xhy::corpus {
namespace {

bool is_nominal(const TaggedWord& w) { return !w.pos.empty() && w.pos[0] == 'n'; }

// Verbs head the predicate; verbal nouns (vn) behave as nominals here.
bool is_predicate(const TaggedWord& w) {
  return !w.pos.empty() && w.pos[0] == 'v' && w.pos != "vn";
}

// Dictionaries often tag verb-object compounds such as 捣蒜 or 抱窝 as nouns.
// A two- or three-character word led by a verb character is read as a predicate.
bool is_verb_object(const TaggedWord& w, const Segmenter& segmenter) {
  const auto chars = utf8::chars(w.text);
  if (chars.size() < 2 || chars.size() > 3) return false;
  const auto first = segmenter.tag(chars[0]);
  return !first.empty() && first[0] == 'v' && first != "vn";
}

bool is_associative(const TaggedWord& w) { return w.text == "的" || w.text == "之"; }

std::string join(const std::vector<TaggedWord>& words, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) out += words[i].text;
  return out;
}

}  // namespace

std::string extract_subject(std::string_view riddle, const Segmenter& segmenter) {
  require(!utf8::trim(riddle).empty(), ErrorKind::kInvalidArgument, "riddle is empty");
  const auto words = segmenter.segment(riddle);
  require(!words.empty(), ErrorKind::kInvalidArgument, "riddle has no tokens");

  std::size_t predicate = words.size();
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (is_predicate(words[i]) || (i > 0 && is_nominal(words[i - 1]) && is_verb_object(words[i], segmenter))) {
      predicate = i;
      break;
    }
  }

  // First nominal run before the predicate.
  std::size_t begin = predicate;
  for (std::size_t i = 0; i < predicate; ++i) {
    if (is_nominal(words[i])) {
      begin = i;
      break;
    }
  }
  if (begin < predicate) {
    std::size_t end = begin;
    while (end < predicate && is_nominal(words[end])) ++end;
    // Associative phrase: the head is the nominal run after 的.
    while (end + 1 < predicate && is_associative(words[end]) && is_nominal(words[end + 1])) {
      begin = end + 1;
      end = begin;
      while (end < predicate && is_nominal(words[end])) ++end;
    }
    return join(words, begin, end);
  }

  for (const auto& w : words) {
    if (is_nominal(w)) return w.text;
  }
  return words.front().text;
}

void assign_subjects(std::vector<AllegoricalSaying>& sayings, const Segmenter& segmenter) {
  std::map<std::string, std::uint32_t> next_id;
  for (auto& s : sayings) {
    if (!s.subject) s.subject = extract_subject(s.riddle, segmenter);
    s.id = next_id[*s.subject]++;
  }
}

}  // namespace xhy::corpus
