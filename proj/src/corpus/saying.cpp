// SPDX-License-Identifier: Apache-2.0
#include "xhy/corpus/saying.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::corpus {

std::string normalize_markup(std::string_view explanation) {
  std::u32string text = utf8::decode(explanation);
  for (auto& cp : text) {
    if (cp == U'(') cp = U'（';
    if (cp == U')') cp = U'）';
  }
  return utf8::encode(text);
}

std::vector<Homophone> extract_homophones(std::string_view explanation,
                                          const pinyin::Lexicon& lexicon) {
  const std::u32string text = utf8::decode(explanation);
  std::vector<Homophone> out;
  for (std::size_t i = 1; i + 2 < text.size(); ++i) {
    if (text[i] != U'（' || text[i + 2] != U'）') continue;
    const char32_t surface = text[i - 1];
    const char32_t intended = text[i + 1];
    if (!utf8::is_cjk(surface) || !utf8::is_cjk(intended)) continue;
    auto shared = lexicon.shared_reading(surface, intended);
    if (!shared) {
      fail(ErrorKind::kParse, "homophone pair " + utf8::encode(surface) + "（" +
                                  utf8::encode(intended) + "） shares no reading");
    }
    out.push_back({utf8::encode(surface), utf8::encode(intended), *shared});
  }
  return out;
}

AllegoricalSaying parse_saying(const Json& record, const pinyin::Lexicon& lexicon) {
  require(record.is_object(), ErrorKind::kParse, "record is not an object");
  for (const char* field : {"riddle", "explanation"}) {
    require(record.contains(field) && record[field].is_string(), ErrorKind::kParse,
            std::string("missing string field \"") + field + "\"");
  }
  AllegoricalSaying s;
  s.riddle = std::string(utf8::trim(record["riddle"].get<std::string>()));
  s.explanation = normalize_markup(utf8::trim(record["explanation"].get<std::string>()));
  require(!s.riddle.empty(), ErrorKind::kParse, "riddle is empty");
  require(!s.explanation.empty(), ErrorKind::kParse, "explanation is empty");
  s.homophones = extract_homophones(s.explanation, lexicon);
  if (record.contains("subject") && !record["subject"].is_null()) {
    require(record["subject"].is_string(), ErrorKind::kParse, "subject must be a string");
    s.subject = record["subject"].get<std::string>();
  }
  if (record.contains("id") && !record["id"].is_null()) {
    require(record["id"].is_number_unsigned(), ErrorKind::kParse,
            "id must be a non-negative integer");
    s.id = record["id"].get<std::uint32_t>();
  }
  return s;
}

std::vector<AllegoricalSaying> load_sayings(const std::filesystem::path& path,
                                            const pinyin::Lexicon& lexicon) {
  std::vector<AllegoricalSaying> out;
  for_each_jsonl(path, [&](const Json& record, std::size_t line) {
    try {
      out.push_back(parse_saying(record, lexicon));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path.string(), line, e.what());
    }
  });
  return out;
}

OrderedJson to_json(const AllegoricalSaying& saying) {
  OrderedJson j;
  j["riddle"] = saying.riddle;
  j["explanation"] = saying.explanation;
  if (saying.subject) j["subject"] = *saying.subject;
  if (saying.id) j["id"] = *saying.id;
  return j;
}

void save_sayings(const std::filesystem::path& path, std::span<const AllegoricalSaying> sayings) {
  std::ostringstream out;
  for (const auto& s : sayings) out << to_json(s).dump() << '\n';
  write_text(path, out.str());
}

DatasetSplit split_dataset(std::span<const AllegoricalSaying> sayings, SplitRatios ratios,
                           std::uint64_t seed) {
  const double total = ratios.train + ratios.validation + ratios.test;
  require(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0 &&
              std::abs(total - 1.0) <= 1e-9,
          ErrorKind::kInvalidArgument, "split ratios must be positive and sum to 1");
  const std::size_t n = sayings.size();
  require(n >= 3, ErrorKind::kInvalidArgument,
          "need at least 3 sayings for three non-empty splits, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  // The small slack keeps exact products such as 10 * 0.1 from flooring low.
  auto part = [n](double r) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n * r + 1e-9)));
  };
  const std::size_t n_val = part(ratios.validation);
  const std::size_t n_test = part(ratios.test);
  require(n_val + n_test < n, ErrorKind::kInvalidArgument, "split leaves no training data");
  const std::size_t n_train = n - n_val - n_test;

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = sayings[order[i]];
    if (i < n_train) {
      split.train.push_back(s);
    } else if (i < n_train + n_val) {
      split.validation.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

void write_split_manifest(const std::filesystem::path& path,
                          std::span<const AllegoricalSaying> part, std::string_view split_name,
                          std::uint64_t seed) {
  std::ostringstream out;
  for (const auto& s : part) {
    OrderedJson j = to_json(s);
    j["split"] = split_name;
    j["seed"] = seed;
    out << j.dump() << '\n';
  }
  write_text(path, out.str());
}

std::string_view to_string(Task task) {
  return task == Task::kCompletion ? "completion" : "scratch";
}

Task parse_task(std::string_view name) {
  if (name == "completion") return Task::kCompletion;
  if (name == "scratch") return Task::kScratch;
  fail(ErrorKind::kInvalidArgument,
       "unknown task \"" + std::string(name) + "\" (expected completion or scratch)");
}

TaskExample format_completion_example(const AllegoricalSaying& saying) {
  return {saying.riddle, saying.explanation};
}

TaskExample format_scratch_example(const AllegoricalSaying& saying) {
  require(saying.subject.has_value() && saying.id.has_value(), ErrorKind::kInvalidArgument,
          "saying \"" + saying.riddle +
              "\" has no subject/id; run subject extraction (assign_subjects) first");
  return {*saying.subject + " " + std::to_string(*saying.id), saying.text()};
}

TaskExample format_example(const AllegoricalSaying& saying, Task task) {
  return task == Task::kCompletion ? format_completion_example(saying)
                                   : format_scratch_example(saying);
}

}  // namespace xhy::corpus
