// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace xhy {

using Json = nlohmann::json;
// Preserves key order so serialized records and reports diff cleanly.
using OrderedJson = nlohmann::ordered_json;

// Calls fn(record, line_number) for each non-blank line. A line that is not
// valid JSON raises ParseError with its 1-based line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);
void append_line(const std::filesystem::path& path, std::string_view line);

std::string sha256_hex(std::string_view data);

}  // namespace xhy
