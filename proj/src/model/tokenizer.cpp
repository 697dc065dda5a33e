// SPDX-License-Identifier: Apache-2.0
#include "xhy/model/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/core/utf8.hpp"

namespace xhy::model {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

bool is_control(char32_t c) { return c < 0x20 || c == 0x7F; }

bool all_cjk(std::u32string_view s) {
  return std::all_of(s.begin(), s.end(), [](char32_t c) { return utf8::is_cjk(c); });
}

// Working model during training: piece -> log-probability.
using Model = std::map<std::u32string, double>;

// Expected piece counts under the current model via forward-backward over
// each distinct sentence lattice.
std::map<std::u32string, double> expected_counts(const Model& model, std::size_t max_len,
                                                 const std::map<std::u32string, double>& sentences) {
  std::map<std::u32string, double> counts;
  for (const auto& [s, weight] : sentences) {
    const std::size_t n = s.size();
    std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
    alpha[0] = 0.0;
    for (std::size_t end = 1; end <= n; ++end) {
      for (std::size_t len = 1; len <= std::min(max_len, end); ++len) {
        auto it = model.find(s.substr(end - len, len));
        if (it != model.end()) alpha[end] = log_add(alpha[end], alpha[end - len] + it->second);
      }
    }
    beta[n] = 0.0;
    for (std::size_t begin = n; begin-- > 0;) {
      for (std::size_t len = 1; len <= std::min(max_len, n - begin); ++len) {
        auto it = model.find(s.substr(begin, len));
        if (it != model.end()) beta[begin] = log_add(beta[begin], it->second + beta[begin + len]);
      }
    }
    const double z = alpha[n];
    if (z == kNegInf) continue;
    for (std::size_t begin = 0; begin < n; ++begin) {
      for (std::size_t len = 1; len <= std::min(max_len, n - begin); ++len) {
        const auto piece = s.substr(begin, len);
        auto it = model.find(piece);
        if (it == model.end()) continue;
        const double lp = alpha[begin] + it->second + beta[begin + len] - z;
        counts[piece] += weight * std::exp(lp);
      }
    }
  }
  return counts;
}

void normalize(Model& model, const std::map<std::u32string, double>& counts) {
  double total = 0.0;
  for (auto& [piece, lp] : model) {
    auto it = counts.find(piece);
    total += it == counts.end() ? 0.0 : it->second;
  }
  for (auto& [piece, lp] : model) {
    auto it = counts.find(piece);
    const double c = it == counts.end() ? 0.0 : it->second;
    // Single characters must stay reachable even when never chosen.
    lp = std::log(std::max(c, 1e-3) / total);
  }
}

}  // namespace

std::string sentinel_text(int k) { return "<extra_id_" + std::to_string(k) + ">"; }

void Tokenizer::add_piece(std::string text, double score, bool learned) {
  if (learned) {
    const auto u = utf8::decode(text);
    index_.emplace(u, static_cast<int>(pieces_.size()));
    max_length_ = std::max(max_length_, static_cast<int>(u.size()));
  }
  pieces_.push_back(std::move(text));
  scores_.push_back(score);
}

Tokenizer Tokenizer::train(std::span<const std::string> texts, const TokenizerConfig& config) {
  require(config.num_sentinels >= 0, ErrorKind::kConfig, "num_sentinels must be >= 0");
  require(config.max_piece_length >= 1, ErrorKind::kConfig, "max_piece_length must be >= 1");
  std::map<std::u32string, double> sentences;
  for (const auto& t : texts) {
    std::u32string s;
    for (char32_t c : utf8::decode(t)) {
      if (!is_control(c)) s.push_back(c);
    }
    if (!s.empty()) sentences[s] += 1.0;
  }
  require(!sentences.empty(), ErrorKind::kInvalidArgument, "tokenizer training corpus is empty");

  // Seed vocabulary: every character plus frequent Chinese substrings.
  std::map<std::u32string, double> raw;
  const auto max_len = static_cast<std::size_t>(config.max_piece_length);
  for (const auto& [s, weight] : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t len = 1; len <= max_len && i + len <= s.size(); ++len) {
        const auto sub = s.substr(i, len);
        if (len > 1 && !all_cjk(sub)) break;
        raw[sub] += weight;
      }
    }
  }
  Model model;
  double total = 0.0;
  std::size_t chars = 0;
  for (const auto& [piece, count] : raw) {
    if (piece.size() == 1 || count >= config.min_piece_count) {
      model[piece] = count;
      total += count;
      chars += piece.size() == 1;
    }
  }
  for (auto& [piece, lp] : model) lp = std::log(lp / total);

  const std::size_t reserved = kFirstSentinel + static_cast<std::size_t>(config.num_sentinels);
  const std::size_t target = std::max<std::size_t>(
      chars, config.vocab_size > static_cast<int>(reserved) ? config.vocab_size - reserved : 0);

  for (;;) {
    std::map<std::u32string, double> counts;
    for (int it = 0; it < config.em_iterations; ++it) {
      counts = expected_counts(model, max_len, sentences);
      normalize(model, counts);
    }
    if (model.size() <= target) break;
    // Drop the multi-character pieces with the lowest expected counts.
    std::vector<std::pair<double, std::u32string>> multi;
    for (const auto& [piece, lp] : model) {
      if (piece.size() > 1) {
        auto c = counts.find(piece);
        multi.emplace_back(c == counts.end() ? 0.0 : c->second, piece);
      }
    }
    std::sort(multi.begin(), multi.end());
    const std::size_t excess = model.size() - target;
    const auto shrink = static_cast<std::size_t>(
        std::ceil(static_cast<double>(model.size()) * (1.0 - config.shrink_factor)));
    const std::size_t drop = std::min({excess, std::max<std::size_t>(shrink, 1), multi.size()});
    if (drop == 0) break;
    for (std::size_t i = 0; i < drop; ++i) model.erase(multi[i].second);
  }

  Tokenizer tok;
  tok.add_piece("<pad>", 0.0, false);
  tok.add_piece("</s>", 0.0, false);
  tok.add_piece("<unk>", 0.0, false);
  for (int k = 0; k < config.num_sentinels; ++k) tok.add_piece(sentinel_text(k), 0.0, false);
  tok.num_sentinels_ = config.num_sentinels;
  // Most probable first, ties by code point, so ids are stable.
  std::vector<std::pair<double, std::u32string>> ordered;
  for (const auto& [piece, lp] : model) ordered.emplace_back(-lp, piece);
  std::sort(ordered.begin(), ordered.end());
  for (const auto& [neg, piece] : ordered) tok.add_piece(utf8::encode(piece), -neg, true);
  return tok;
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  Tokenizer tok;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError(path.string(), line_no, "expected piece<TAB>score");
    }
    double score = 0.0;
    try {
      score = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path.string(), line_no, "score is not a number");
    }
    const std::string piece = line.substr(0, tab);
    const int id = tok.size();
    bool special = id < kFirstSentinel;
    if (!special && piece == sentinel_text(id - kFirstSentinel)) {
      special = true;
      ++tok.num_sentinels_;
    }
    tok.add_piece(piece, score, !special);
  }
  require(tok.size() > kFirstSentinel && tok.pieces_[kPad] == "<pad>" && tok.pieces_[kEos] == "</s>" &&
              tok.pieces_[kUnk] == "<unk>",
          ErrorKind::kParse, path.string() + ": missing special tokens");
  return tok;
}

void Tokenizer::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < pieces_.size(); ++i) out << pieces_[i] << '\t' << scores_[i] << '\n';
  write_text(path, out.str());
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::u32string s;
  for (char32_t c : utf8::decode(text)) {
    if (!is_control(c)) s.push_back(c);
  }
  const std::size_t n = s.size();
  // Unknown characters cost far more than any real piece.
  const double unk_score = -100.0;
  std::vector<double> best(n + 1, kNegInf);
  std::vector<int> piece_at(n + 1, kUnk);
  std::vector<std::size_t> length(n + 1, 1);
  best[0] = 0.0;
  for (std::size_t end = 1; end <= n; ++end) {
    for (std::size_t len = 1; len <= std::min<std::size_t>(max_length_, end); ++len) {
      auto it = index_.find(s.substr(end - len, len));
      if (it == index_.end()) continue;
      const double score = best[end - len] + scores_[it->second];
      if (score > best[end]) {
        best[end] = score;
        piece_at[end] = it->second;
        length[end] = len;
      }
    }
    if (best[end] == kNegInf) {
      best[end] = best[end - 1] + unk_score;
      piece_at[end] = kUnk;
      length[end] = 1;
    }
  }
  std::vector<int> ids;
  for (std::size_t end = n; end > 0; end -= length[end]) ids.push_back(piece_at[end]);
  std::reverse(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> Tokenizer::pieces(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(piece(id));
  return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (!is_special(id)) out += piece(id);
  }
  return out;
}

int Tokenizer::sentinel(int k) const {
  require(k >= 0 && k < num_sentinels_, ErrorKind::kInvalidArgument,
          "sentinel index " + std::to_string(k) + " exceeds the sentinel budget");
  return kFirstSentinel + k;
}

const std::string& Tokenizer::piece(int id) const {
  require(id >= 0 && id < size(), ErrorKind::kInvalidArgument,
          "token id " + std::to_string(id) + " out of range");
  return pieces_[static_cast<std::size_t>(id)];
}

int Tokenizer::id_of(std::string_view piece) const {
  for (int id = 0; id < kFirstSentinel + num_sentinels_; ++id) {
    if (pieces_[static_cast<std::size_t>(id)] == piece) return id;
  }
  auto it = index_.find(utf8::decode(piece));
  return it == index_.end() ? kUnk : it->second;
}

}  // namespace xhy::model
