// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xhy::utf8 {

std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

// Splits into one UTF-8 string per code point.
std::vector<std::string> chars(std::string_view text);

// CJK unified ideographs (basic block plus extensions A-G and compatibility).
bool is_cjk(char32_t cp);
bool contains_cjk(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace xhy::utf8
