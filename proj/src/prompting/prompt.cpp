// SPDX-License-Identifier: Apache-2.0
#include "xhy/prompting/prompt.hpp"

#include <numeric>

#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/core/random.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::prompting {
namespace {

std::string read_template(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorKind::kIo, "missing template " + path.string());
  std::string text = read_text(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

void replace_all(std::string& text, std::string_view key, std::string_view value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos;
       pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
}

std::string demo_line(const corpus::AllegoricalSaying& s, corpus::Task task,
                      const TemplateSet& templates) {
  std::string line;
  if (task == corpus::Task::kCompletion) {
    line = templates.completion_demo;
  } else {
    require(s.subject.has_value(), ErrorKind::kInvalidArgument,
            "scratch demonstration '" + s.riddle + "' has no subject; run extract_subject first");
    line = templates.scratch_demo;
    replace_all(line, "{subject}", *s.subject);
  }
  replace_all(line, "{riddle}", s.riddle);
  replace_all(line, "{explanation}", s.explanation);
  return line;
}

}  // namespace

TemplateSet TemplateSet::load(const std::filesystem::path& root, const std::string& language) {
  const auto dir = root / language;
  return {read_template(dir / "description.txt"), read_template(dir / "completion.txt"),
          read_template(dir / "scratch.txt"), read_template(dir / "completion_demo.txt"),
          read_template(dir / "scratch_demo.txt")};
}

std::string render_prompt(const PromptSpec& spec, const TemplateSet& templates) {
  const std::string& layout =
      spec.task == corpus::Task::kCompletion ? templates.completion : templates.scratch;
  std::string out;
  std::size_t start = 0;
  while (start <= layout.size()) {
    auto end = layout.find('\n', start);
    if (end == std::string::npos) end = layout.size();
    std::string line = layout.substr(start, end - start);
    start = end + 1;
    if (line == "{demonstrations}") {
      for (const auto& demo : spec.demos) {
        if (!out.empty()) out += '\n';
        out += demo_line(demo, spec.task, templates);
      }
      continue;
    }
    replace_all(line, "{description}", templates.description);
    replace_all(line, "{query}", spec.query);
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

std::vector<corpus::AllegoricalSaying> sample_demos(std::span<const corpus::AllegoricalSaying> train,
                                                    std::size_t k, std::uint64_t seed) {
  require(k <= train.size(), ErrorKind::kInvalidArgument,
          "cannot sample " + std::to_string(k) + " demonstrations from " +
              std::to_string(train.size()) + " training sayings");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::vector<corpus::AllegoricalSaying> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
    out.push_back(train[order[i]]);
  }
  return out;
}

std::string clean_response(std::string_view response, std::string_view riddle) {
  std::string_view text = utf8::trim(response);
  const std::string echoed = std::string(utf8::trim(riddle)) + std::string(corpus::kSayingSeparator);
  if (!riddle.empty() && text.starts_with(echoed)) text = utf8::trim(text.substr(echoed.size()));
  return std::string(text);
}

}  // namespace xhy::prompting
