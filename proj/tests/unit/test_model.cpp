// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <memory>

#include "../support/gradcheck.hpp"
#include "fixtures.hpp"
#include "xhy/core/error.hpp"
#include "xhy/model/checkpoint.hpp"
#include "xhy/model/text_pipeline.hpp"

using namespace xhy;
using namespace xhy::model;
using ag::Matrix;

namespace {

FusionModelConfig tiny(int vocab) {
  FusionModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.d_ff = 16;
  c.pinyin_dim = 8;
  c.conv_filters = 8;
  c.vocab_size = vocab;
  c.dropout = 0.0;
  return c;
}

std::shared_ptr<const pinyin::Lexicon> shared_lexicon() {
  static auto lex = std::make_shared<const pinyin::Lexicon>(test::lexicon());
  return lex;
}

TextPipeline pipeline_for(const std::vector<std::string>& texts, int vocab = 60) {
  TokenizerConfig tc;
  tc.vocab_size = vocab;
  return TextPipeline(Tokenizer::train(texts, tc), shared_lexicon());
}

EncoderInput sample_input(int n, int vocab) {
  EncoderInput in;
  for (int i = 0; i < n; ++i) {
    in.ids.push_back(20 + (i * 7) % (vocab - 20));
    in.pinyin.push_back(pinyin::token_pinyin(test::lexicon(), i % 2 ? "豆腐" : "盐", ""));
  }
  return in;
}

}  // namespace

TEST_CASE("tokenizer learns multi-character Chinese pieces and round-trips") {
  const std::vector<std::string> texts = {"咸菜烧豆腐", "豆腐掉进灰堆里", "豆腐渣贴对联", "卖豆腐的"};
  TokenizerConfig tc;
  tc.vocab_size = 60;
  const auto tok = Tokenizer::train(texts, tc);
  const auto ids = tok.encode("咸菜烧豆腐");
  CHECK(tok.decode(ids) == "咸菜烧豆腐");
  const auto pieces = tok.pieces(ids);
  CHECK(std::find(pieces.begin(), pieces.end(), "豆腐") != pieces.end());
  CHECK(tok.encode("猫")[0] == Tokenizer::kUnk);
  CHECK(tok.piece(Tokenizer::kEos) == "</s>");
  CHECK(tok.piece(tok.sentinel(0)) == "<extra_id_0>");
  CHECK(tok.is_special(tok.sentinel(3)));

  const auto dir = test::scratch_dir("tokenizer");
  tok.save(dir / "tok.tsv");
  const auto again = Tokenizer::load(dir / "tok.tsv");
  CHECK(again.size() == tok.size());
  CHECK(again.num_sentinels() == tok.num_sentinels());
  CHECK(again.encode("豆腐渣贴对联") == tok.encode("豆腐渣贴对联"));
}

TEST_CASE("config validation") {
  auto c = tiny(50);
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny(50);
  c.conv_kernel = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(config_from_json(to_json(tiny(50))).d_model == 8);
  CHECK_THROWS_AS(config_from_json(Json{{"d_modle", 8}}), Error);
}

TEST_CASE("pinyin embedding shapes and purity") {
  FusionModel model(tiny(50), 1);
  const auto in = sample_input(5, 50);
  const auto e = model.pinyin_embed(in.pinyin);
  CHECK(e.rows() == 5);
  CHECK(e.cols() == 8);
  // Tokens 1 and 3 share a romanization.
  CHECK(e.value().row(1) == e.value().row(3));

  pinyin::PinyinSequence pad;
  pad.symbols.assign(pinyin::kDefaultLength, pinyin::Symbol::kPad);
  const std::vector<pinyin::PinyinSequence> pads = {pad};
  CHECK(model.pinyin_embed(pads).value().allFinite());

  auto bad = pad;
  bad.symbols[0] = static_cast<pinyin::Symbol>(40);
  const std::vector<pinyin::PinyinSequence> bads = {bad};
  CHECK_THROWS_AS(model.pinyin_embed(bads), Error);
}

TEST_CASE("fusion with identity projections over one position returns the token vector") {
  auto c = tiny(50);
  c.n_heads = 1;
  FusionModel model(c, 2);
  for (const char* w : {"fusion.q", "fusion.k", "fusion.v", "fusion.o"}) {
    model.parameters().at(w).mutable_value() = Matrix::Identity(8, 8);
  }
  Rng rng(3);
  Matrix a(1, 8), b(1, 8);
  for (int i = 0; i < 8; ++i) {
    a(0, i) = rng.normal();
    b(0, i) = rng.normal();
  }
  const auto out = model.fuse(ag::Var(a), ag::Var(b));
  CHECK((out.value() - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(model.fuse(ag::Var(Matrix::Zero(2, 8)), ag::Var(b)), Error);
}

TEST_CASE("encode shapes, determinism and padding") {
  FusionModel model(tiny(50), 4);
  auto in = sample_input(4, 50);
  const auto h1 = model.encode(in).value();
  CHECK(h1.rows() == 4);
  CHECK(h1.cols() == 8);
  CHECK(model.encode(in).value() == h1);

  auto padded = in;
  padded.ids.push_back(0);
  padded.pinyin.push_back(pinyin::placeholder("<pad>"));
  padded.mask = {1, 1, 1, 1, 0};
  const auto h2 = model.encode(padded).value();
  CHECK((h2.topRows(4) - h1).cwiseAbs().maxCoeff() < 1e-12);

  auto broken = in;
  broken.pinyin.pop_back();
  CHECK_THROWS_AS(model.encode(broken), Error);
}

TEST_CASE("pool is a masked mean") {
  Matrix v(3, 2);
  v << 1, 2, -1, -2, 5, 5;
  const std::vector<std::uint8_t> mask = {1, 1, 0};
  CHECK(FusionModel::pool(ag::Var(v), mask).value().isZero());
  Matrix same = Matrix::Ones(4, 3) * 0.5;
  CHECK(FusionModel::pool(ag::Var(same)).value().isApprox(Matrix::Ones(1, 3) * 0.5));

  Rng rng(8);
  Matrix r(4, 8);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  const std::vector<std::uint8_t> m2 = {1, 0, 1, 1};
  Matrix expected = Matrix::Zero(1, 8);
  for (int i : {0, 2, 3}) expected += r.row(i);
  expected /= 3.0;
  CHECK((FusionModel::pool(ag::Var(r), m2).value() - expected).cwiseAbs().maxCoeff() < 1e-12);
  const std::vector<std::uint8_t> none = {0, 0, 0, 0};
  CHECK_THROWS_AS(FusionModel::pool(ag::Var(r), none), Error);
}

TEST_CASE("romanization gradients reach the fusion parameters") {
  auto c = tiny(50);
  c.init_std = 0.3;
  FusionModel model(c, 5);
  const auto in = sample_input(4, 50);
  const std::vector<int> target = {21, 30, 1};
  Rng rng(9);
  const auto samples = test::gradient_check(
      model.parameters(), [&] { return model.loss(in, target); },
      {"pinyin.", "fusion.", "encoder.", "decoder.", "token_embedding", "lm_head"}, 60, rng);
  int ok = 0;
  for (const auto& s : samples) ok += s.relative_error < 1e-3;
  CHECK(samples.size() == 60);
  CHECK(ok >= 57);
  for (const auto& s : samples) {
    if (s.parameter.starts_with("pinyin.")) CHECK(s.analytic != 0.0);
  }
}

TEST_CASE("generation is deterministic, budgeted and rejects empty input") {
  const auto pipe = pipeline_for({"咸菜烧豆腐", "有言（盐）在先"});
  auto c = tiny(pipe.tokenizer().size());
  FusionModel model(c, 6);
  const auto a = pipe.generate(model, "咸菜烧豆腐");
  CHECK(a == pipe.generate(model, "咸菜烧豆腐"));
  DecodingOptions one;
  one.max_gen_len = 1;
  CHECK(model.generate(pipe.encoder_input("咸菜烧豆腐"), one).size() <= 1);
  CHECK_THROWS_AS(pipe.generate(model, "  "), Error);
}

TEST_CASE("a tiny model memorizes one pair and the romanization path is live") {
  const auto pipe = pipeline_for({"咸菜烧豆腐", "有言（盐）在先"});
  auto c = tiny(pipe.tokenizer().size());
  c.d_model = 32;
  c.conv_filters = 32;
  c.pinyin_dim = 16;
  c.d_ff = 64;
  // At std 0.02 the fusion attention starts uniform and the query side gets
  // almost no gradient.
  c.fan_in_init = true;
  FusionModel model(c, 7);
  AdamWConfig oc;
  oc.lr = 3e-3;
  oc.weight_decay = 0.0;
  AdamW opt(model.parameters(), model.parameters().names(), oc);
  const auto input = pipe.encoder_input("咸菜烧豆腐");
  const auto target = pipe.target_ids("有言（盐）在先");
  for (int step = 0; step < 300; ++step) {
    model.loss(input, target).backward();
    opt.step();
  }
  CHECK(pipe.generate(model, "咸菜烧豆腐") == "有言（盐）在先");

  // Swap the romanization of one token from "yan" to "yin".
  const auto src = pipe.encoder_input("有言在先");
  auto swapped = src;
  bool changed = false;
  for (auto& seq : swapped.pinyin) {
    if (seq.str() == "yan") {
      seq = pinyin::token_pinyin(test::lexicon(), "银", "");
      changed = true;
    }
  }
  REQUIRE(changed);
  const std::vector<int> dec = {0};
  ag::NoGradGuard guard;
  const auto l1 = model.decode_logits(model.encode(src), {}, dec).value();
  const auto l2 = model.decode_logits(model.encode(swapped), {}, dec).value();
  CHECK((l1 - l2).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("checkpoints round-trip and backbone import skips romanization parameters") {
  const auto pipe = pipeline_for({"咸菜烧豆腐", "有言（盐）在先"});
  FusionModel model(tiny(pipe.tokenizer().size()), 10);
  const auto dir = test::scratch_dir("checkpoint");
  save_checkpoint(dir, model, pipe.tokenizer(), Json{{"step", 3}});
  CHECK(has_checkpoint(dir));
  const auto ck = load_checkpoint(dir);
  CHECK(ck.trainer_state["step"] == 3);
  for (const auto& name : model.parameters().names()) {
    CHECK(ck.model->parameters().at(name).value() == model.parameters().at(name).value());
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), Error);

  FusionModel fresh(tiny(pipe.tokenizer().size()), 11);
  const auto fresh_conv = fresh.parameters().at("pinyin.conv.weight").value();
  const auto imported = import_backbone(fresh, dir / "parameters.bin");
  CHECK(fresh.parameters().at("pinyin.conv.weight").value() == fresh_conv);
  CHECK(fresh.parameters().at("lm_head").value() == model.parameters().at("lm_head").value());
  for (const auto& name : imported) CHECK_FALSE(FusionModel::is_pinyin_parameter(name));
}
