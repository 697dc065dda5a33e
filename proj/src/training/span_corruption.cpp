// SPDX-License-Identifier: Apache-2.0
#include "xhy/training/span_corruption.hpp"

#include <algorithm>
#include <cmath>

#include "xhy/core/error.hpp"

namespace xhy::training {
namespace {

// Splits n items into k non-empty runs with uniformly chosen cut points.
std::vector<std::size_t> random_segmentation(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> cuts(n - 1);
  for (std::size_t i = 0; i < cuts.size(); ++i) cuts[i] = i + 1;
  // Partial Fisher-Yates: the first k-1 entries are a uniform sample.
  for (std::size_t i = 0; i + 1 < k; ++i) {
    std::swap(cuts[i], cuts[i + rng.uniform_index(cuts.size() - i)]);
  }
  cuts.resize(k - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> lengths;
  std::size_t prev = 0;
  for (auto c : cuts) {
    lengths.push_back(c - prev);
    prev = c;
  }
  lengths.push_back(n - prev);
  return lengths;
}

bool is_sentinel(int id, const SpanCorruptionConfig& config) {
  return id >= config.first_sentinel && id < config.first_sentinel + config.sentinel_budget;
}

}  // namespace

void SpanCorruptionConfig::validate() const {
  require(noise_density > 0.0 && noise_density < 1.0, ErrorKind::kConfig,
          "noise_density must be in (0, 1)");
  require(mean_span_length >= 1.0, ErrorKind::kConfig, "mean_span_length must be >= 1");
  require(sentinel_budget >= 1, ErrorKind::kConfig, "sentinel_budget must be >= 1");
}

CorruptedSequence make_span_corruption(std::span<const int> ids, const SpanCorruptionConfig& config,
                                       Rng& rng) {
  config.validate();
  const std::size_t n = ids.size();
  require(n >= 2, ErrorKind::kInvalidArgument, "span corruption needs at least 2 tokens");

  const double exact = static_cast<double>(n) * config.noise_density;
  auto noise = static_cast<std::size_t>(std::floor(exact));
  if (rng.bernoulli(exact - std::floor(exact))) ++noise;
  noise = std::clamp<std::size_t>(noise, 1, n - 1);
  const std::size_t kept = n - noise;

  auto spans = static_cast<std::size_t>(std::llround(static_cast<double>(noise) / config.mean_span_length));
  spans = std::clamp<std::size_t>(spans, 1, std::min({noise, kept, static_cast<std::size_t>(config.sentinel_budget)}));

  const auto noise_lengths = random_segmentation(noise, spans, rng);
  const auto kept_lengths = random_segmentation(kept, spans, rng);

  CorruptedSequence out;
  out.noise_mask.assign(n, 0);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < spans; ++s) {
    for (std::size_t i = 0; i < kept_lengths[s]; ++i) out.input.push_back(ids[pos++]);
    const int sentinel = config.first_sentinel + static_cast<int>(s);
    out.input.push_back(sentinel);
    out.target.push_back(sentinel);
    for (std::size_t i = 0; i < noise_lengths[s]; ++i) {
      out.noise_mask[pos] = 1;
      out.target.push_back(ids[pos++]);
    }
  }
  return out;
}

std::vector<int> reconstruct(std::span<const int> input, std::span<const int> target,
                             const SpanCorruptionConfig& config) {
  std::vector<int> out;
  for (int id : input) {
    if (!is_sentinel(id, config)) {
      out.push_back(id);
      continue;
    }
    auto it = std::find(target.begin(), target.end(), id);
    require(it != target.end(), ErrorKind::kInvalidArgument,
            "sentinel " + std::to_string(id) + " missing from target");
    for (++it; it != target.end() && !is_sentinel(*it, config); ++it) out.push_back(*it);
  }
  return out;
}

}  // namespace xhy::training
