// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xhy/core/random.hpp"

namespace xhy::training {

struct SpanCorruptionConfig {
  double noise_density = 0.15;
  double mean_span_length = 3.0;
  int sentinel_budget = 16;
  int first_sentinel = 3;  // id of <extra_id_0>

  void validate() const;
};

struct CorruptedSequence {
  std::vector<int> input;   // kept tokens with one sentinel per removed span
  std::vector<int> target;  // each sentinel followed by the tokens it replaced
  std::vector<std::uint8_t> noise_mask;  // 1 where the original token was removed
};

// T5-style span corruption. The number of removed tokens is n * noise_density
// rounded stochastically (floor plus a Bernoulli draw on the fraction), so the
// expected masked fraction is exact, then clamped to [1, n-1]. Spans alternate
// kept/removed starting with a kept run. Sequences shorter than 2 are rejected.
CorruptedSequence make_span_corruption(std::span<const int> ids, const SpanCorruptionConfig& config,
                                       Rng& rng);

// Inverse of make_span_corruption: substitutes each sentinel in input with
// the tokens following it in target.
std::vector<int> reconstruct(std::span<const int> input, std::span<const int> target,
                             const SpanCorruptionConfig& config);

}  // namespace xhy::training
