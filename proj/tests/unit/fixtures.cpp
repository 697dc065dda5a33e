// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

namespace xhy::test {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(XHY_TEST_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const pinyin::Lexicon& lexicon() {
  static const auto lex = pinyin::Lexicon::load(data_dir() / "pinyin_lexicon.tsv");
  return lex;
}

const corpus::DictionarySegmenter& segmenter() {
  static const auto seg = corpus::DictionarySegmenter::load(data_dir() / "words.tsv");
  return seg;
}

}  // namespace xhy::test
