// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xhy::training {

// Completes a riddle; in practice greedy decoding with the Stage-I model.
using Completer = std::function<std::string(const std::string& riddle)>;

// Line-delimited {"riddle_hash", "completion"} records keyed by the SHA-256
// of the riddle text. Appends are written through immediately.
class HardNegativeCache {
 public:
  explicit HardNegativeCache(std::filesystem::path path);

  std::optional<std::string> get(std::string_view riddle) const;
  void put(std::string_view riddle, const std::string& completion);
  std::size_t size() const { return entries_.size(); }

 private:
  std::filesystem::path path_;
  std::unordered_map<std::string, std::string> entries_;
};

// Last character of the riddle; the default substitute for empty completions.
std::string last_character(std::string_view riddle);

// One completion per riddle, served from the cache when present. An empty
// completion is replaced by last_token(riddle) and logged.
std::vector<std::string> synthesize_hard_negatives(
    const Completer& completer, std::span<const std::string> riddles, HardNegativeCache& cache,
    const std::function<std::string(std::string_view)>& last_token = last_character);

}  // namespace xhy::training
