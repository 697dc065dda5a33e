// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>

#include "../support/oracles.hpp"
#include "fixtures.hpp"
#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"
#include "xhy/eval/embedders.hpp"
#include "xhy/eval/metrics.hpp"
#include "xhy/eval/report.hpp"
#include "xhy/eval/scorer.hpp"

using namespace xhy;
using namespace xhy::eval;

namespace {

Tokens toks(std::initializer_list<const char*> words) {
  Tokens out;
  for (const char* w : words) out.emplace_back(w);
  return out;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MetricConfig unigram_only() {
  MetricConfig c;
  c.bleu_max_n = 1;
  return c;
}

test::Vec to_vec(const Eigen::VectorXd& v) { return test::Vec(v.data(), v.data() + v.size()); }

}  // namespace

TEST_CASE("bleu: identity, brevity penalty, clipping") {
  const auto ref = toks({"猫", "在", "垫子", "上", "睡觉"});
  CHECK(bleu(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));
  // shorter than N: only orders 1 and 2 exist
  CHECK(bleu(toks({"猫", "在"}), toks({"猫", "在"})) == doctest::Approx(1.0).epsilon(1e-12));

  const double bp = bleu(toks({"猫", "在", "垫子"}), toks({"猫", "在", "垫子", "上"}), unigram_only());
  CHECK(std::abs(bp - std::exp(1.0 - 4.0 / 3.0)) < 1e-9);
  CHECK(std::abs(bp - 0.7165) < 1e-4);

  // c = 3 > r = 2, so BP = 1
  const double clipped = bleu(toks({"的", "的", "的"}), toks({"的", "猫"}), unigram_only());
  CHECK(std::abs(clipped - 1.0 / 3.0) < 1e-9);
}

TEST_CASE("bleu: smoothing, empty candidate, bad weights") {
  const double s = bleu(toks({"甲", "乙", "丙"}), toks({"甲", "丁", "丙"}));
  CHECK(s > 0.0);
  CHECK(s < 1e-3);
  CHECK(bleu({}, toks({"甲"})) == 0.0);

  MetricConfig bad;
  bad.bleu_weights = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.bleu_weights = {1.0};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("rouge_n") {
  const auto x = toks({"A", "B", "C"});
  CHECK(rouge_n(x, x, 1) == 1.0);
  CHECK(rouge_n(toks({"A", "B"}), toks({"A", "C"}), 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rouge_n(x, toks({"A", "B"}), 3) == 0.0);
  // clipped per reference and summed
  const std::vector<Tokens> refs = {toks({"A", "B"}), toks({"A", "A"})};
  CHECK(rouge_n(toks({"A", "A"}), refs, 1) == doctest::Approx(0.75).epsilon(1e-12));
  // a too-short reference is skipped
  const std::vector<Tokens> mixed = {toks({"A"}), toks({"A", "B"})};
  CHECK(rouge_n(toks({"A", "B"}), mixed, 2) == 1.0);
  CHECK_THROWS_AS(rouge_n(x, x, 0), Error);
}

TEST_CASE("rouge_l and lcs_length") {
  const auto abcd = toks({"A", "B", "C", "D"});
  const auto acbd = toks({"A", "C", "B", "D"});
  CHECK(lcs_length(abcd, acbd) == 3);
  CHECK(std::abs(rouge_l(abcd, acbd, 1.0) - 0.75) < 1e-9);
  CHECK(rouge_l(abcd, abcd) == 1.0);
  CHECK(rouge_l(abcd, toks({"E", "F"})) == 0.0);
  CHECK(lcs_length({}, abcd) == 0);
  CHECK_THROWS_AS(rouge_l({}, abcd), Error);

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens x, y;
    const auto nx = 1 + rng.uniform_index(7);
    const auto ny = 1 + rng.uniform_index(7);
    for (std::uint64_t i = 0; i < nx; ++i) x.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(3))));
    for (std::uint64_t i = 0; i < ny; ++i) y.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(3))));
    const auto lcs = lcs_length(x, y);
    CHECK(static_cast<int>(lcs) == test::brute_force_lcs(x, y));
    CHECK(lcs == lcs_length(y, x));
    if (lcs > 0) {
      const double r = static_cast<double>(lcs) / static_cast<double>(y.size());
      const double p = static_cast<double>(lcs) / static_cast<double>(x.size());
      CHECK(std::abs(rouge_l(x, y, 1.0) - 2.0 * r * p / (r + p)) < 1e-12);
    }
  }
}

TEST_CASE("lcs_length against exhaustive enumeration, strings up to length 5") {
  const test::AllStrings all(3, 5);
  const auto& strings = all.strings();
  for (const auto& x : strings) {
    const auto expected = all.lcs_with_all(x);
    for (std::size_t j = 0; j < strings.size(); ++j) {
      REQUIRE(static_cast<int>(lcs_length(x, strings[j])) == expected[j]);
    }
  }
  // the oracle agrees with the subset-enumeration one
  const auto row = all.lcs_with_all(strings.back());
  for (std::size_t j = 0; j < strings.size(); j += 7) {
    CHECK(row[j] == test::brute_force_lcs(strings.back(), strings[j]));
  }
}

TEST_CASE("bertscore") {
  HashedCharEmbedder hashed(16, 3);
  const auto words = toks({"外甥", "打", "灯笼"});
  CHECK(std::abs(bertscore(words, words, hashed) - 1.0) < 1e-12);
  CHECK(std::abs(bertscore(words, words, hashed, BertScoreMode::kF1) - 1.0) < 1e-12);

  TableEmbedder basis({{"a", vec({1, 0, 0, 0})},
                       {"b", vec({0, 1, 0, 0})},
                       {"c", vec({0, 0, 1, 0})},
                       {"d", vec({0, 0, 0, 1})}});
  CHECK(bertscore(toks({"a", "b"}), toks({"c", "d"}), basis) == 0.0);

  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::unordered_map<std::string, Eigen::VectorXd> table;
    for (const char* t : {"p", "q", "r", "s", "t", "u", "v"}) {
      Eigen::VectorXd v(5);
      for (int k = 0; k < 5; ++k) v(k) = rng.normal();
      table[t] = v;
    }
    const TableEmbedder emb(table);
    const auto cand = toks({"p", "q", "r"});
    const auto ref = toks({"s", "t", "u", "p"});
    std::vector<test::Vec> c, r;
    for (const auto& t : cand) c.push_back(to_vec(table[t]));
    for (const auto& t : ref) r.push_back(to_vec(table[t]));
    CHECK(std::abs(bertscore(cand, ref, emb) - test::naive_bertscore(c, r)) < 1e-9);
  }

  TableEmbedder with_zero({{"z", vec({0, 0})}, {"o", vec({1, 0})}});
  CHECK_THROWS_AS(bertscore(toks({"z"}), toks({"o"}), with_zero), Error);
  CHECK_THROWS_AS(bertscore(Tokens{}, toks({"o"}), with_zero), Error);
}

TEST_CASE("annotations store annotator means") {
  const auto a = make_annotation("x", {1, 2}, {3, 3});
  CHECK(a.coherency == 1.5);
  CHECK(a.humor == 3.0);
  CHECK_THROWS_AS(make_annotation("x", {0, 2}, {1, 1}), Error);
  CHECK_THROWS_AS(make_annotation("x", {1, 2}, {4, 1}), Error);

  const auto dir = test::scratch_dir("annotations");
  write_text(dir / "a.jsonl",
             "{\"text\":\"外甥打灯笼——照舅\",\"coherency\":[3,2],\"humor\":[2,1]}\n"
             "{\"text\":\"孔夫子搬家——净是书\",\"coherency\":[3,3],\"humor\":[1,2]}\n");
  const auto records = load_annotations(dir / "a.jsonl");
  REQUIRE(records.size() == 2);
  CHECK(records[0].coherency == 2.5);
  CHECK(records[0].humor == 1.5);
  const std::set<double> allowed = {1.0, 1.5, 2.0, 2.5, 3.0};
  for (const auto& r : records) {
    CHECK(allowed.count(r.coherency) == 1);
    CHECK(allowed.count(r.humor) == 1);
  }

  write_text(dir / "bad.jsonl", "{\"text\":\"x\",\"coherency\":[3,2],\"humor\":[2,1]}\n"
                                "{\"text\":\"y\",\"coherency\":[5,2],\"humor\":[2,1]}\n");
  try {
    load_annotations(dir / "bad.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  write_text(dir / "half.jsonl", "{\"text\":\"y\",\"coherency\":[2.5,2],\"humor\":[2,1]}\n");
  CHECK_THROWS_AS(load_annotations(dir / "half.jsonl"), ParseError);
}

TEST_CASE("learned scorer trains, clamps and round-trips") {
  const HashedSentenceEncoder encoder(16, 9);
  std::vector<AnnotationRecord> toy;
  const char* texts[] = {"外甥打灯笼——照舅", "孔夫子搬家——净是书", "哑巴吃黄连——有苦说不出",
                         "竹篮打水——一场空",  "狗拿耗子——多管闲事", "老鼠过街——人人喊打",
                         "芝麻开花——节节高",  "飞蛾扑火——自取灭亡", "泥菩萨过河——自身难保",
                         "擀面杖吹火——一窍不通"};
  for (int i = 0; i < 10; ++i) {
    toy.push_back(make_annotation(texts[i], {1 + i % 3, 1 + (i / 2) % 3}, {1 + (i + 1) % 3, 2}));
  }
  ScorerConfig cfg;
  cfg.seed = 4;
  LearnedScorer scorer(encoder.dim(), cfg);
  const double before = scorer.mse(toy, encoder);
  const auto losses = scorer.train(toy, encoder);
  CHECK(losses.size() == static_cast<std::size_t>(cfg.epochs + 1));
  CHECK(std::abs(losses.front() - before) < 1e-9);
  CHECK(scorer.mse(toy, encoder) < before);
  CHECK(std::abs(losses.back() - scorer.mse(toy, encoder)) < 1e-9);

  // far outside the training inputs the raw heads leave [1, 3]
  const Eigen::VectorXd huge = Eigen::VectorXd::Constant(encoder.dim(), 1e4);
  const auto s = scorer.predict(huge);
  CHECK(s.coherency >= kMinScore);
  CHECK(s.coherency <= kMaxScore);
  CHECK(s.humor >= kMinScore);
  CHECK(s.humor <= kMaxScore);
  for (const auto& a : toy) {
    const auto p = scorer.predict(a.text, encoder);
    CHECK(p.coherency >= 1.0);
    CHECK(p.coherency <= 3.0);
  }

  const auto dir = test::scratch_dir("scorer");
  scorer.save(dir);
  const auto loaded = LearnedScorer::load(dir);
  const auto a = scorer.predict(texts[0], encoder);
  const auto b = loaded.predict(texts[0], encoder);
  CHECK(a.coherency == b.coherency);
  CHECK(a.humor == b.humor);

  LearnedScorer again(encoder.dim(), cfg);
  again.train(toy, encoder);
  CHECK(again.predict(texts[3], encoder).humor == scorer.predict(texts[3], encoder).humor);

  std::vector<AnnotationRecord> one(toy.begin(), toy.begin() + 1);
  CHECK_THROWS_AS(LearnedScorer(encoder.dim(), cfg).train(one, encoder), Error);
  auto out_of_range = toy;
  out_of_range[0].humor = 3.5;
  CHECK_THROWS_AS(LearnedScorer(encoder.dim(), cfg).train(out_of_range, encoder), Error);
}

TEST_CASE("evaluate_task") {
  MetricConfig config;
  config.segmenter = std::shared_ptr<const corpus::Segmenter>(&test::segmenter(), [](auto*) {});
  const std::vector<std::string> golds = {"照舅（旧）", "净是书（输）", "有苦说不出"};
  const HashedCharEmbedder embedder(16, 1);
  EvaluationContext ctx;
  ctx.model = "gold";
  ctx.embedder = &embedder;

  const auto self = evaluate_task(golds, golds, corpus::Task::kCompletion, config, ctx);
  REQUIRE(self.samples.size() == 3);
  for (const auto& s : self.samples) {
    CHECK(*s.bleu == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*s.rouge_1 == 1.0);
    CHECK(*s.rouge_l == 1.0);
    CHECK(*s.bertscore == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(!s.coherency);
  }

  const std::vector<std::string> outputs = {"照舅", "", "苦"};
  const auto report = evaluate_task(outputs, golds, corpus::Task::kCompletion, config, ctx);
  double sum = 0.0;
  for (const auto& s : report.samples) sum += *s.rouge_1;
  CHECK(std::abs(*report.mean(&SampleMetrics::rouge_1) - sum / 3.0) < 1e-12);
  CHECK(*report.samples[1].bleu == 0.0);
  const auto j = report.to_json();
  CHECK(j["count"] == 3);
  CHECK(j["samples"].size() == 3);
  CHECK(j["means"].contains("bleu"));

  CHECK_THROWS_AS(evaluate_task(outputs, std::span(golds).first(2), corpus::Task::kCompletion, config, ctx),
                  Error);
  CHECK_THROWS_AS(evaluate_task(outputs, golds, corpus::Task::kScratch, config, ctx), Error);

  const HashedSentenceEncoder encoder(16, 2);
  const LearnedScorer scorer(encoder.dim());
  ctx.scorer = &scorer;
  ctx.encoder = &encoder;
  const auto scratch = evaluate_task(outputs, golds, corpus::Task::kScratch, config, ctx);
  const auto sj = scratch.to_json();
  CHECK(sj["task"] == "scratch");
  for (const auto& row : sj["samples"]) {
    CHECK(!row.contains("bleu"));
    CHECK(!row.contains("rouge_1"));
    CHECK(!row.contains("rouge_l"));
    CHECK(row.contains("coherency"));
    CHECK(row.contains("humor"));
  }
  CHECK(!sj["means"].contains("bleu"));
}

TEST_CASE("model-backed embedders") {
  const std::vector<std::string> texts = {"外甥打灯笼照舅", "孔夫子搬家净是书", "老鼠过街人人喊打"};
  model::TokenizerConfig tc;
  tc.vocab_size = 60;
  const model::TextPipeline pipe(model::Tokenizer::train(texts, tc),
                                 std::make_shared<const pinyin::Lexicon>(test::lexicon()));
  model::FusionModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.d_ff = 16;
  c.pinyin_dim = 8;
  c.conv_filters = 8;
  c.vocab_size = pipe.tokenizer().size();
  const model::FusionModel m(c, 3);

  const ModelEmbedder embedder(m, pipe);
  const auto words = toks({"外甥", "打", "灯笼", "Q"});
  const auto e = embedder.embed(words);
  CHECK(e.rows() == 4);
  CHECK(e.cols() == 8);
  CHECK(std::abs(bertscore(words, words, embedder) - 1.0) < 1e-12);

  const ModelSentenceEncoder encoder(m, pipe);
  const auto v = encoder.encode("外甥打灯笼");
  CHECK(v.size() == encoder.dim());
  CHECK((v - encoder.encode("外甥打灯笼")).norm() == 0.0);
}
