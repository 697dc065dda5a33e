// SPDX-License-Identifier: Apache-2.0
#include "xhy/corpus/segmenter.hpp"

#include <cmath>
#include <limits>

#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::corpus {
namespace {

bool is_ascii_alnum(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'　';
}

}  // namespace

std::vector<std::string> Segmenter::words(std::string_view text) const {
  std::vector<std::string> out;
  for (auto& w : segment(text)) out.push_back(std::move(w.text));
  return out;
}

DictionarySegmenter DictionarySegmenter::load(const std::filesystem::path& path) {
  return parse(read_text(path));
}

DictionarySegmenter DictionarySegmenter::parse(std::string_view text) {
  struct Raw {
    std::u32string word;
    double freq;
    std::string pos;
  };
  std::vector<Raw> raw;
  double total = 0.0;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (utf8::trim(line).empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) {
      throw ParseError("<segmenter dictionary>", line_no, "expected word<TAB>freq<TAB>pos");
    }
    double freq = 0.0;
    try {
      freq = std::stod(std::string(line.substr(t1 + 1, t2 - t1 - 1)));
    } catch (const std::exception&) {
      throw ParseError("<segmenter dictionary>", line_no, "frequency is not a number");
    }
    if (freq <= 0.0) continue;
    raw.push_back({utf8::decode(line.substr(0, t1)), freq,
                   std::string(utf8::trim(line.substr(t2 + 1)))});
    total += freq;
  }
  DictionarySegmenter seg;
  if (total <= 0.0) return seg;
  const double log_total = std::log(total);
  for (auto& r : raw) {
    if (r.word.empty()) continue;
    seg.max_length_ = std::max(seg.max_length_, r.word.size());
    seg.entries_[r.word] = {std::log(r.freq) - log_total, std::move(r.pos)};
  }
  seg.unknown_log_prob_ = -log_total;  // frequency-1 floor
  return seg;
}

void DictionarySegmenter::segment_chinese(std::u32string_view run,
                                          std::vector<TaggedWord>& out) const {
  const std::size_t n = run.size();
  // best[i]: best log-probability of segmenting run[i:], choice[i]: word length.
  std::vector<double> best(n + 1, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> choice(n + 1, 1);
  best[n] = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t len = 1; len <= max_length_ && i + len <= n; ++len) {
      auto it = entries_.find(std::u32string(run.substr(i, len)));
      double lp;
      if (it != entries_.end()) {
        lp = it->second.log_prob;
      } else if (len == 1) {
        lp = unknown_log_prob_;
      } else {
        continue;
      }
      const double score = lp + best[i + len];
      // Prefer the longer word on exact ties so results are stable.
      if (score > best[i] || (score == best[i] && len > choice[i])) {
        best[i] = score;
        choice[i] = len;
      }
    }
  }
  for (std::size_t i = 0; i < n; i += choice[i]) {
    const std::u32string word(run.substr(i, choice[i]));
    auto it = entries_.find(word);
    out.push_back({utf8::encode(word), it != entries_.end() ? it->second.pos : "x"});
  }
}

std::string DictionarySegmenter::tag(std::string_view word) const {
  auto it = entries_.find(utf8::decode(word));
  return it == entries_.end() ? std::string() : it->second.pos;
}

std::vector<TaggedWord> DictionarySegmenter::segment(std::string_view text) const {
  const std::u32string s = utf8::decode(text);
  std::vector<TaggedWord> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_space(s[i])) {
      ++i;
    } else if (utf8::is_cjk(s[i])) {
      std::size_t j = i;
      while (j < s.size() && utf8::is_cjk(s[j])) ++j;
      segment_chinese(std::u32string_view(s).substr(i, j - i), out);
      i = j;
    } else if (is_ascii_alnum(s[i])) {
      std::size_t j = i;
      bool digits = true;
      while (j < s.size() && is_ascii_alnum(s[j])) {
        digits = digits && s[j] >= U'0' && s[j] <= U'9';
        ++j;
      }
      out.push_back({utf8::encode(std::u32string_view(s).substr(i, j - i)), digits ? "m" : "eng"});
      i = j;
    } else {
      out.push_back({utf8::encode(s[i]), "x"});
      ++i;
    }
  }
  return out;
}

}  // namespace xhy::corpus
