// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "xhy/corpus/segmenter.hpp"
#include "xhy/pinyin/lexicon.hpp"

namespace xhy::test {

inline std::filesystem::path data_dir() { return XHY_TEST_DATA_DIR; }
inline std::filesystem::path assets_dir() { return XHY_TEST_ASSETS_DIR; }
inline std::filesystem::path golden_dir() { return XHY_TEST_GOLDEN_DIR; }

// Fresh scratch directory under the build tree.
std::filesystem::path scratch_dir(const std::string& name);

const pinyin::Lexicon& lexicon();
const corpus::DictionarySegmenter& segmenter();

}  // namespace xhy::test
