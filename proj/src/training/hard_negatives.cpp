// SPDX-License-Identifier: Apache-2.0
#include "xhy/training/hard_negatives.hpp"

#include <spdlog/spdlog.h>

#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::training {

HardNegativeCache::HardNegativeCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for_each_jsonl(path_, [&](const Json& record, std::size_t line) {
    if (!record.contains("riddle_hash") || !record.contains("completion")) {
      throw ParseError(path_.string(), line, "expected riddle_hash and completion");
    }
    entries_[record["riddle_hash"].get<std::string>()] = record["completion"].get<std::string>();
  });
}

std::optional<std::string> HardNegativeCache::get(std::string_view riddle) const {
  auto it = entries_.find(sha256_hex(riddle));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void HardNegativeCache::put(std::string_view riddle, const std::string& completion) {
  const auto hash = sha256_hex(riddle);
  entries_[hash] = completion;
  OrderedJson record;
  record["riddle_hash"] = hash;
  record["completion"] = completion;
  append_line(path_, record.dump());
}

std::string last_character(std::string_view riddle) {
  const auto chars = utf8::chars(utf8::trim(riddle));
  require(!chars.empty(), ErrorKind::kInvalidArgument, "riddle is empty");
  return chars.back();
}

std::vector<std::string> synthesize_hard_negatives(
    const Completer& completer, std::span<const std::string> riddles, HardNegativeCache& cache,
    const std::function<std::string(std::string_view)>& last_token) {
  std::vector<std::string> out;
  out.reserve(riddles.size());
  std::size_t substituted = 0;
  for (const auto& riddle : riddles) {
    if (auto hit = cache.get(riddle)) {
      out.push_back(*hit);
      continue;
    }
    std::string completion = completer(riddle);
    if (utf8::trim(completion).empty()) {
      completion = last_token(riddle);
      ++substituted;
      spdlog::warn("empty hard-negative completion for '{}', using '{}'", riddle, completion);
    }
    cache.put(riddle, completion);
    out.push_back(std::move(completion));
  }
  if (substituted) spdlog::info("{} of {} hard negatives were substituted", substituted, riddles.size());
  return out;
}

}  // namespace xhy::training
