// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xhy/corpus/saying.hpp"

namespace xhy::prompting {

// Template files for one language, read from <root>/<language>/:
//   description.txt      the fixed description sentence
//   completion.txt       task layout with {description}, {demonstrations}, {query}
//   scratch.txt          same for generation from a subject
//   completion_demo.txt  one demonstration, {riddle} and {explanation}
//   scratch_demo.txt     one demonstration, plus {subject}
struct TemplateSet {
  std::string description;
  std::string completion;
  std::string scratch;
  std::string completion_demo;
  std::string scratch_demo;

  static TemplateSet load(const std::filesystem::path& root, const std::string& language = "zh");
};

struct PromptSpec {
  corpus::Task task = corpus::Task::kCompletion;
  std::vector<corpus::AllegoricalSaying> demos;  // empty for zero-shot
  std::string query;                             // riddle or subject
};

// Lines in template order with placeholders filled. The {demonstrations}
// line expands to one line per demo, or disappears when there are none.
// No trailing newline.
std::string render_prompt(const PromptSpec& spec, const TemplateSet& templates);

// k distinct sayings drawn uniformly from the training split.
std::vector<corpus::AllegoricalSaying> sample_demos(std::span<const corpus::AllegoricalSaying> train,
                                                    std::size_t k, std::uint64_t seed);

// Strips whitespace and an echoed "riddle——" prefix from a model reply.
std::string clean_response(std::string_view response, std::string_view riddle);

}  // namespace xhy::prompting
