// SPDX-License-Identifier: Apache-2.0
#include "xhy/model/config.hpp"

#include "xhy/core/error.hpp"

namespace xhy::model {

void FusionModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    require(v > 0, ErrorKind::kConfig, std::string(name) + " must be positive");
  };
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(n_enc_layers, "n_enc_layers");
  positive(n_dec_layers, "n_dec_layers");
  positive(d_ff, "d_ff");
  positive(pinyin_dim, "pinyin_dim");
  positive(max_gen_len, "max_gen_len");
  require(L_py >= 2, ErrorKind::kConfig, "L_py must be at least 2");
  require(d_model % n_heads == 0, ErrorKind::kConfig, "d_model must be divisible by n_heads");
  require(conv_kernel == 2, ErrorKind::kConfig, "conv_kernel is fixed at 2");
  require(conv_filters == d_model, ErrorKind::kConfig, "conv_filters must equal d_model");
  require(pinyin_alphabet_size == pinyin::kAlphabetSize, ErrorKind::kConfig,
          "pinyin_alphabet_size must be " + std::to_string(pinyin::kAlphabetSize));
  require(num_sentinels >= 0, ErrorKind::kConfig, "num_sentinels must be >= 0");
  require(vocab_size > 3 + num_sentinels, ErrorKind::kConfig, "vocab_size too small");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must be in [0, 1)");
  require(init_std > 0.0, ErrorKind::kConfig, "init_std must be positive");
}

OrderedJson to_json(const FusionModelConfig& c) {
  OrderedJson j;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["n_enc_layers"] = c.n_enc_layers;
  j["n_dec_layers"] = c.n_dec_layers;
  j["d_ff"] = c.d_ff;
  j["vocab_size"] = c.vocab_size;
  j["num_sentinels"] = c.num_sentinels;
  j["pinyin_alphabet_size"] = c.pinyin_alphabet_size;
  j["L_py"] = c.L_py;
  j["pinyin_dim"] = c.pinyin_dim;
  j["conv_kernel"] = c.conv_kernel;
  j["conv_filters"] = c.conv_filters;
  j["max_gen_len"] = c.max_gen_len;
  j["dropout"] = c.dropout;
  j["init_std"] = c.init_std;
  j["fan_in_init"] = c.fan_in_init;
  return j;
}

FusionModelConfig config_from_json(const Json& json) {
  require(json.is_object(), ErrorKind::kConfig, "model config must be an object");
  FusionModelConfig c;
  for (const auto& [key, value] : json.items()) {
    try {
      if (key == "d_model") c.d_model = value.get<int>();
      else if (key == "n_heads") c.n_heads = value.get<int>();
      else if (key == "n_enc_layers") c.n_enc_layers = value.get<int>();
      else if (key == "n_dec_layers") c.n_dec_layers = value.get<int>();
      else if (key == "d_ff") c.d_ff = value.get<int>();
      else if (key == "vocab_size") c.vocab_size = value.get<int>();
      else if (key == "num_sentinels") c.num_sentinels = value.get<int>();
      else if (key == "pinyin_alphabet_size") c.pinyin_alphabet_size = value.get<int>();
      else if (key == "L_py") c.L_py = value.get<int>();
      else if (key == "pinyin_dim") c.pinyin_dim = value.get<int>();
      else if (key == "conv_kernel") c.conv_kernel = value.get<int>();
      else if (key == "conv_filters") c.conv_filters = value.get<int>();
      else if (key == "max_gen_len") c.max_gen_len = value.get<int>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "init_std") c.init_std = value.get<double>();
      else if (key == "fan_in_init") c.fan_in_init = value.get<bool>();
      else fail(ErrorKind::kConfig, "unknown model config key '" + key + "'");
    } catch (const Json::exception& e) {
      fail(ErrorKind::kConfig, "model config key '" + key + "': " + e.what());
    }
  }
  return c;
}

}  // namespace xhy::model
