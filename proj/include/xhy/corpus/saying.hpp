// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xhy/core/io.hpp"
#include "xhy/pinyin/lexicon.hpp"

namespace xhy::corpus {

// Separator between riddle and explanation in whole-saying renderings.
inline constexpr std::string_view kSayingSeparator = "——";

struct Homophone {
  std::string surface;   // character written in the explanation
  std::string intended;  // character inside the parentheses
  std::string shared_pinyin;
  bool operator==(const Homophone&) const = default;
};

struct AllegoricalSaying {
  std::string riddle;
  std::string explanation;  // keeps the X（Y） homophone markup
  std::vector<Homophone> homophones;
  std::optional<std::string> subject;
  std::optional<std::uint32_t> id;  // unique within its subject group

  std::string text() const { return riddle + std::string(kSayingSeparator) + explanation; }
};

// Rewrites half-width parentheses to the canonical full-width （）.
std::string normalize_markup(std::string_view explanation);

// Extracts X（Y） pairs where both X and Y are single Chinese characters.
// Parentheticals spanning several characters are glosses, not homophones.
// Throws Error(kParse) when a marked pair shares no reading.
std::vector<Homophone> extract_homophones(std::string_view explanation,
                                          const pinyin::Lexicon& lexicon);

// Parses one record. Required fields: riddle, explanation. Optional: subject, id.
AllegoricalSaying parse_saying(const Json& record, const pinyin::Lexicon& lexicon);

// Line-delimited JSON, one record per line. A malformed record raises
// ParseError carrying its line number; an empty file yields an empty list.
std::vector<AllegoricalSaying> load_sayings(const std::filesystem::path& path,
                                            const pinyin::Lexicon& lexicon);

OrderedJson to_json(const AllegoricalSaying& saying);
void save_sayings(const std::filesystem::path& path, std::span<const AllegoricalSaying> sayings);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<AllegoricalSaying> train;
  std::vector<AllegoricalSaying> validation;
  std::vector<AllegoricalSaying> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

// Seeded shuffle then contiguous partition. Validation and test sizes are
// floor(n * ratio), at least one each; the remainder goes to train.
DatasetSplit split_dataset(std::span<const AllegoricalSaying> sayings, SplitRatios ratios,
                           std::uint64_t seed);

// Split manifest: the corpus record format plus "split" and "seed" fields.
void write_split_manifest(const std::filesystem::path& path,
                          std::span<const AllegoricalSaying> part, std::string_view split_name,
                          std::uint64_t seed);

struct TaskExample {
  std::string input;
  std::string target;
  bool operator==(const TaskExample&) const = default;
};

enum class Task { kCompletion, kScratch };
std::string_view to_string(Task task);
Task parse_task(std::string_view name);

// riddle -> explanation, both verbatim.
TaskExample format_completion_example(const AllegoricalSaying& saying);
// "{subject} {id}" -> "riddle——explanation". Needs subject and id assigned.
TaskExample format_scratch_example(const AllegoricalSaying& saying);
TaskExample format_example(const AllegoricalSaying& saying, Task task);

}  // namespace xhy::corpus
