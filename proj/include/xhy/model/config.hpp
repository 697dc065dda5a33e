// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xhy/core/io.hpp"
#include "xhy/pinyin/pinyin.hpp"

namespace xhy::model {

struct FusionModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_ff = 256;
  int vocab_size = 2000;
  int num_sentinels = 16;  // ids 3 .. 3+num_sentinels-1, never generated
  int pinyin_alphabet_size = pinyin::kAlphabetSize;
  int L_py = pinyin::kDefaultLength;
  int pinyin_dim = 64;  // width of each romanization symbol embedding
  int conv_kernel = 2;
  int conv_filters = 64;
  int max_gen_len = 32;
  double dropout = 0.1;
  double init_std = 0.02;
  // When set, matrices use std = 1/sqrt(fan_in) and embedding tables std 1
  // instead of the constant init_std.
  bool fan_in_init = false;

  // Throws Error(kConfig) naming the first violated invariant.
  void validate() const;
};

OrderedJson to_json(const FusionModelConfig& config);
// Unknown keys are rejected; missing keys keep their defaults.
FusionModelConfig config_from_json(const Json& json);

}  // namespace xhy::model
