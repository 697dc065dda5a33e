// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xhy::model {

struct TokenizerConfig {
  int vocab_size = 2000;  // target size including special tokens
  int num_sentinels = 16;
  int max_piece_length = 4;  // in characters; multi-character pieces are Chinese only
  int min_piece_count = 2;
  int em_iterations = 2;      // EM passes between pruning rounds
  double shrink_factor = 0.75;
};

// Unigram-LM subword tokenizer. Ids: 0 <pad>, 1 </s>, 2 <unk>, then the
// sentinels <extra_id_0>..., then learned pieces. Every character seen in
// training is kept as a single-character piece, so <unk> only appears for
// characters never seen.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kFirstSentinel = 3;

  static Tokenizer train(std::span<const std::string> texts, const TokenizerConfig& config);

  // One piece per line: piece<TAB>log-probability, in id order.
  static Tokenizer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Viterbi segmentation; no end-of-sequence id appended.
  std::vector<int> encode(std::string_view text) const;
  std::vector<std::string> pieces(std::span<const int> ids) const;
  // Concatenates non-special pieces.
  std::string decode(std::span<const int> ids) const;

  int size() const { return static_cast<int>(pieces_.size()); }
  int num_sentinels() const { return num_sentinels_; }
  int sentinel(int k) const;
  bool is_special(int id) const { return id >= 0 && id < kFirstSentinel + num_sentinels_; }
  const std::string& piece(int id) const;
  double score(int id) const { return scores_.at(id); }
  int id_of(std::string_view piece) const;  // kUnk when absent

 private:
  std::vector<std::string> pieces_;
  std::vector<double> scores_;
  std::unordered_map<std::u32string, int> index_;  // learned pieces only
  int num_sentinels_ = 0;
  int max_length_ = 1;

  void add_piece(std::string text, double score, bool learned);
};

std::string sentinel_text(int k);

}  // namespace xhy::model
