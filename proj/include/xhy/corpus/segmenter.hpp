// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xhy::corpus {

struct TaggedWord {
  std::string text;
  std::string pos;  // ICTCLAS-style tag: n, nr, v, a, uj, x, m, eng, ...
  bool operator==(const TaggedWord&) const = default;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<TaggedWord> segment(std::string_view text) const = 0;
  // Dictionary tag of a word, empty when unknown.
  virtual std::string tag(std::string_view word) const = 0;

  std::vector<std::string> words(std::string_view text) const;
};

// Dictionary segmenter: builds the DAG of dictionary words over each run of
// Chinese characters and picks the maximum-probability path under a unigram
// model. Characters outside the dictionary become single-character words;
// ASCII letter and digit runs stay whole; whitespace is dropped.
//
// Dictionary file: word<TAB>frequency<TAB>pos, one per line.
class DictionarySegmenter final : public Segmenter {
 public:
  static DictionarySegmenter load(const std::filesystem::path& path);
  static DictionarySegmenter parse(std::string_view text);

  std::vector<TaggedWord> segment(std::string_view text) const override;
  std::string tag(std::string_view word) const override;

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    double log_prob;
    std::string pos;
  };
  std::unordered_map<std::u32string, Entry> entries_;
  std::size_t max_length_ = 1;
  double unknown_log_prob_ = -30.0;

  void segment_chinese(std::u32string_view run, std::vector<TaggedWord>& out) const;
};

}  // namespace xhy::corpus
