// SPDX-License-Identifier: Apache-2.0
// Prints one PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include "../support/golden.hpp"
#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"
#include "../unit/fixtures.hpp"
#include "xhy/cli/commands.hpp"
#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/core/random.hpp"
#include "xhy/core/utf8.hpp"
#include "xhy/corpus/saying.hpp"
#include "xhy/eval/embedders.hpp"
#include "xhy/eval/metrics.hpp"
#include "xhy/eval/scorer.hpp"
#include "xhy/model/fusion_model.hpp"
#include "xhy/pinyin/pinyin.hpp"
#include "xhy/prompting/prompt.hpp"
#include "xhy/training/contrastive.hpp"
#include "xhy/training/span_corruption.hpp"

using namespace xhy;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failing check and keeps going.
struct Checker {
  Outcome out;
  void expect(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<test::Vec> to_vecs(const std::vector<Eigen::VectorXd>& v) {
  std::vector<test::Vec> out;
  for (const auto& x : v) out.emplace_back(x.data(), x.data() + x.size());
  return out;
}

char32_t single(const std::string& s) {
  const auto cps = utf8::decode(s);
  return cps.size() == 1 ? cps[0] : U'\0';
}

Outcome contrastive_oracle() {
  Checker c;
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0, worst_moved = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    training::ContrastiveBatch b;
    b.tau = trial % 2 ? 1.0 : 0.05;
    const int n = 1 + static_cast<int>(rng.uniform_index(8));
    const int d = 1 + static_cast<int>(rng.uniform_index(16));
    auto draw = [&] {
      Eigen::VectorXd v(d);
      for (int k = 0; k < d; ++k) v(k) = rng.normal();
      return v;
    };
    for (int i = 0; i < n; ++i) {
      b.anchors.push_back(draw());
      b.positives.push_back(draw());
      b.hard_negatives.push_back(draw());
    }
    const auto per = training::contrastive_losses(b);
    const auto r = to_vecs(b.anchors), e = to_vecs(b.positives), cn = to_vecs(b.hard_negatives);
    for (std::size_t i = 0; i < per.size(); ++i) {
      worst = std::max(worst, std::abs(per[i] - test::naive_contrastive_term(r, e, cn, b.tau, i)));
    }
    worst = std::max(worst, std::abs(training::contrastive_loss(b) -
                                     test::naive_contrastive_mean(r, e, cn, b.tau)));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        auto moved = b;
        moved.hard_negatives[j] = draw();
        worst_moved = std::max(worst_moved, std::abs(training::contrastive_losses(moved)[i] - per[i]));
      }
    }
  }
  const double t = seconds_since(t0);
  c.expect(worst < 1e-9, "oracle deviation " + std::to_string(worst));
  c.expect(worst_moved < 1e-12, "l_i moved by " + std::to_string(worst_moved));
  c.expect(t < 5.0, "took " + std::to_string(t) + " s");
  if (c.out.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "max |diff| %.2e, max shift %.2e, %.2f s", worst, worst_moved, t);
    c.out.detail = buf;
  }
  return c.out;
}

Outcome closed_forms() {
  Checker c;
  // sim(r,e) = sim(r,c)
  training::ContrastiveBatch equal{{vec({1, 0})}, {vec({1, 1})}, {vec({1, -1})}, 0.05};
  const double a = training::contrastive_loss(equal);
  // sim(r,e) = 1, sim(r,c) = -1, tau = 1
  training::ContrastiveBatch apart{{vec({1, 0})}, {vec({2, 0})}, {vec({-3, 0})}, 1.0};
  const double b = training::contrastive_loss(apart);
  c.expect(std::abs(a - std::log(2.0)) < 1e-9, "equal case gave " + std::to_string(a));
  c.expect(std::abs(b - std::log1p(std::exp(-2.0))) < 1e-9, "apart case gave " + std::to_string(b));
  if (c.out.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "ln2 diff %.1e, ln(1+e^-2) diff %.1e", std::abs(a - std::log(2.0)),
                  std::abs(b - std::log1p(std::exp(-2.0))));
    c.out.detail = buf;
  }
  return c.out;
}

Outcome gradient_check() {
  Checker c;
  const auto t0 = Clock::now();
  model::FusionModelConfig mc;
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.n_enc_layers = 1;
  mc.n_dec_layers = 1;
  mc.d_ff = 16;
  mc.pinyin_dim = 8;
  mc.conv_filters = 8;
  mc.vocab_size = 50;
  mc.dropout = 0.0;
  mc.fan_in_init = true;
  model::FusionModel m(mc, 21);

  model::EncoderInput in;
  const char* words[] = {"咸菜", "烧", "豆腐", "有", "盐"};
  for (int i = 0; i < 5; ++i) {
    in.ids.push_back(10 + i * 7);
    in.pinyin.push_back(pinyin::token_pinyin(test::lexicon(), words[i], "咸菜烧豆腐"));
  }
  in.ids.push_back(1);
  in.pinyin.push_back(pinyin::placeholder("</s>"));
  const std::vector<int> target = {12, 33, 47, 1};

  Rng rng(22);
  const auto samples = test::gradient_check(
      m.parameters(), [&] { return m.loss(in, target); },
      {"pinyin.", "fusion.", "encoder.", "decoder.", "token_embedding", "lm_head"}, 200, rng);
  int ok = 0, pinyin_n = 0, fusion_n = 0;
  for (const auto& s : samples) {
    ok += s.relative_error < 1e-3;
    pinyin_n += s.parameter.starts_with("pinyin.");
    fusion_n += s.parameter.starts_with("fusion.");
  }
  const double t = seconds_since(t0);
  c.expect(samples.size() == 200, "drew " + std::to_string(samples.size()) + " samples");
  c.expect(pinyin_n > 0 && fusion_n > 0, "pinyin or fusion parameters not sampled");
  c.expect(ok >= 190, std::to_string(ok) + "/200 within 1e-3");
  c.expect(t < 120.0, "took " + std::to_string(t) + " s");
  if (c.out.pass) {
    c.out.detail = std::to_string(ok) + "/" + std::to_string(samples.size()) + " within 1e-3 (" +
                   std::to_string(pinyin_n) + " pinyin, " + std::to_string(fusion_n) + " fusion), " +
                   std::to_string(t).substr(0, 5) + " s";
  }
  return c.out;
}

eval::Tokens toks(std::initializer_list<const char*> items) {
  eval::Tokens t;
  for (const char* s : items) t.emplace_back(s);
  return t;
}

Outcome metric_oracles() {
  using namespace eval;
  Checker c;
  const auto t0 = Clock::now();
  MetricConfig uni;
  uni.bleu_max_n = 1;
  uni.bleu_weights = {1.0};

  const auto ref = toks({"猫", "在", "垫子", "上"});
  c.expect(std::abs(bleu(ref, ref) - 1.0) < 1e-9, "bleu identity");
  c.expect(std::abs(bleu(toks({"猫", "在", "垫子"}), ref, uni) - std::exp(1.0 - 4.0 / 3.0)) < 1e-9,
           "bleu brevity penalty");
  c.expect(std::abs(bleu(toks({"的", "的", "的"}), toks({"的", "猫"}), uni) - 1.0 / 3.0) < 1e-9,
           "bleu clipping");

  const auto abc = toks({"A", "B", "C"});
  c.expect(std::abs(rouge_n(abc, abc, 1) - 1.0) < 1e-9, "rouge_n identity");
  c.expect(std::abs(rouge_n(toks({"A", "B"}), toks({"A", "C"}), 1) - 0.5) < 1e-9, "rouge_n 1/2");
  c.expect(rouge_n(abc, toks({"A", "B"}), 3) == 0.0, "rouge_n vacuous");

  const auto abcd = toks({"A", "B", "C", "D"});
  const auto acbd = toks({"A", "C", "B", "D"});
  c.expect(std::abs(rouge_l(abcd, abcd) - 1.0) < 1e-9, "rouge_l identity");
  c.expect(std::abs(rouge_l(abcd, acbd, 1.0) - 0.75) < 1e-9, "rouge_l 0.75");
  c.expect(rouge_l(abcd, toks({"E", "F"})) == 0.0, "rouge_l disjoint");
  c.expect(lcs_length({}, abcd) == 0, "lcs empty");
  c.expect(lcs_length(abcd, acbd) == 3 && lcs_length(acbd, abcd) == 3, "lcs ABCD/ACBD");

  HashedCharEmbedder hashed(16, 3);
  const auto words = toks({"外甥", "打", "灯笼"});
  c.expect(std::abs(bertscore(words, words, hashed) - 1.0) < 1e-9, "bertscore identity");
  TableEmbedder basis({{"a", vec({1, 0, 0, 0})},
                       {"b", vec({0, 1, 0, 0})},
                       {"c", vec({0, 0, 1, 0})},
                       {"d", vec({0, 0, 0, 1})}});
  c.expect(std::abs(bertscore(toks({"a", "b"}), toks({"c", "d"}), basis)) < 1e-9, "bertscore orthogonal");
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::unordered_map<std::string, Eigen::VectorXd> table;
    for (const char* t : {"p", "q", "r", "s", "t", "u", "v"}) {
      Eigen::VectorXd v(6);
      for (int k = 0; k < 6; ++k) v(k) = rng.normal();
      table[t] = v;
    }
    const TableEmbedder emb(table);
    const auto cand = toks({"p", "q", "r"});
    const auto refs = toks({"s", "t", "u", "v"});
    std::vector<test::Vec> cv, rv;
    for (const auto& t : cand) cv.emplace_back(table[t].data(), table[t].data() + 6);
    for (const auto& t : refs) rv.emplace_back(table[t].data(), table[t].data() + 6);
    if (std::abs(bertscore(cand, refs, emb) - test::naive_bertscore(cv, rv)) >= 1e-9) {
      c.expect(false, "bertscore oracle, trial " + std::to_string(trial));
    }
  }

  // every pair of strings of length <= 8 over {a, b, c}
  const test::AllStrings all(3, 8);
  const auto& strings = all.strings();
  long pairs = 0, mismatches = 0;
  for (const auto& x : strings) {
    const auto expected = all.lcs_with_all(x);
    for (std::size_t j = 0; j < strings.size(); ++j) {
      mismatches += static_cast<int>(lcs_length(x, strings[j])) != expected[j];
      ++pairs;
    }
  }
  const double t = seconds_since(t0);
  c.expect(mismatches == 0, std::to_string(mismatches) + " lcs mismatches");
  c.expect(t < 60.0, "took " + std::to_string(t) + " s");
  if (c.out.pass) {
    c.out.detail = "hand-worked cases exact, lcs agrees on " + std::to_string(pairs) + " pairs, " +
                   std::to_string(t).substr(0, 5) + " s";
  }
  return c.out;
}

Outcome span_corruption() {
  Checker c;
  training::SpanCorruptionConfig config;
  Rng rng(41);
  auto random_ids = [&](int n) {
    std::vector<int> ids(n);
    for (auto& id : ids) id = 100 + static_cast<int>(rng.uniform_index(1900));
    return ids;
  };
  int exact = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto ids = random_ids(2 + static_cast<int>(rng.uniform_index(60)));
    const auto s = training::make_span_corruption(ids, config, rng);
    exact += training::reconstruct(s.input, s.target, config) == ids;
  }
  double masked = 0, total = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto ids = random_ids(8 + static_cast<int>(rng.uniform_index(40)));
    const auto s = training::make_span_corruption(ids, config, rng);
    for (auto m : s.noise_mask) masked += m;
    total += static_cast<double>(ids.size());
  }
  const double rate = masked / total;
  c.expect(exact == 1000, std::to_string(exact) + "/1000 round-trips exact");
  c.expect(std::abs(rate - config.noise_density) <= 0.01, "mask rate " + std::to_string(rate));
  if (c.out.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "1000/1000 round-trips, mask rate %.4f vs %.2f", rate,
                  config.noise_density);
    c.out.detail = buf;
  }
  return c.out;
}

Outcome desk_run() {
  Checker c;
  const auto t0 = Clock::now();
  const auto work = test::scratch_dir("acceptance_desk");
  Json j;
  j["paths"] = {{"work", work.string()}};
  auto config = cli::parse_config(j, test::data_dir().parent_path());
  config.validate();

  cli::cmd_prepare(config);
  cli::cmd_train(config, 1);
  const auto s2 = cli::cmd_train(config, 2);
  const auto s3 = cli::cmd_train(config, 3);
  cli::cmd_generate(config);

  const auto& losses = s3["train_losses"];
  const double first = losses.front().get<double>();
  const double last = losses.back().get<double>();
  const double drop = 1.0 - last / first;
  const double gap = s2["gap_after"].get<double>();
  std::size_t total = 0, nonempty = 0;
  const cli::Workspace ws(work);
  for_each_jsonl(ws.model_outputs(config.task), [&](const Json& row, std::size_t) {
    ++total;
    nonempty += !utf8::trim(row["output"].get<std::string>()).empty();
  });
  const double t = seconds_since(t0);

  c.expect(losses.size() == 20, "stage 3 ran " + std::to_string(losses.size()) + " epochs");
  c.expect(drop >= 0.30, "stage 3 loss fell " + std::to_string(100 * drop) + "%");
  c.expect(total > 0 && nonempty * 100 >= total * 95,
           std::to_string(nonempty) + "/" + std::to_string(total) + " non-empty");
  c.expect(gap > 0.0, "similarity gap " + std::to_string(gap));
  c.expect(t < 900.0, "took " + std::to_string(t) + " s");
  if (c.out.pass) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "stage 3 loss %.3f -> %.3f (-%.0f%%), %zu/%zu non-empty, gap %.3f, %.0f s", first, last,
                  100 * drop, nonempty, total, gap, t);
    c.out.detail = buf;
  }
  return c.out;
}

Outcome prompt_fixtures() {
  Checker c;
  const prompting::TemplateSet templates = prompting::TemplateSet::load(test::assets_dir() / "templates");
  int same = 0, n = 0;
  for (const auto& g : test::golden_prompts()) {
    ++n;
    const auto path = test::golden_dir() / g.file;
    const bool ok = std::filesystem::exists(path) &&
                    prompting::render_prompt(g.spec, templates) == read_text(path);
    same += ok;
    c.expect(ok, g.file + " differs");
  }
  c.expect(n == 6, std::to_string(n) + " fixtures");
  if (c.out.pass) c.out.detail = std::to_string(same) + "/6 byte-identical";
  return c.out;
}

Outcome homophones() {
  Checker c;
  const auto& lex = test::lexicon();
  const auto sayings = corpus::load_sayings(test::data_dir() / "sayings_500.jsonl", lex);
  std::size_t triples = 0;
  for (const auto& s : sayings) {
    for (const auto& h : s.homophones) {
      ++triples;
      const char32_t a = single(h.surface), b = single(h.intended);
      const bool ok = a && b && lex.same_pinyin(a, b) &&
                      lex.shared_reading(a, b) == h.shared_pinyin;
      c.expect(ok, s.text() + " fails the predicate");
    }
  }
  const auto x = corpus::parse_saying(Json{{"riddle", "咸菜烧豆腐"}, {"explanation", "有言（盐）在先"}}, lex);
  c.expect(x.homophones.size() == 1 && x.homophones[0] == corpus::Homophone{"言", "盐", "yan"},
           "咸菜烧豆腐 example");
  c.expect(triples > 0, "corpus has no homophone triples");
  if (c.out.pass) {
    c.out.detail = std::to_string(triples) + " corpus triples pass, 咸菜烧豆腐 -> (言, 盐, yan)";
  }
  return c.out;
}

Outcome annotations() {
  using namespace eval;
  Checker c;
  const std::set<double> allowed = {1.0, 1.5, 2.0, 2.5, 3.0};
  const auto dir = test::scratch_dir("acceptance_annotations");
  std::string text;
  std::vector<std::array<int, 4>> votes;
  const char* sayings[] = {"外甥打灯笼——照舅", "孔夫子搬家——净是书", "咸菜烧豆腐——有言（盐）在先",
                           "泥菩萨过江——自身难保", "哑巴吃黄连——有苦说不出", "竹篮打水——一场空"};
  for (int a = 1; a <= 3; ++a) {
    for (int b = 1; b <= 3; ++b) {
      for (const char* s : sayings) {
        std::array<int, 4> v = {a, b, 4 - a, b};
        votes.push_back(v);
        Json row{{"text", s}, {"coherency", {v[0], v[1]}}, {"humor", {v[2], v[3]}}};
        text += row.dump() + "\n";
      }
    }
  }
  write_text(dir / "annotations.jsonl", text);
  const auto records = load_annotations(dir / "annotations.jsonl");
  c.expect(records.size() == votes.size(), "record count");
  for (std::size_t i = 0; i < records.size() && i < votes.size(); ++i) {
    const auto& v = votes[i];
    c.expect(records[i].coherency == (v[0] + v[1]) / 2.0, "coherency is not the mean");
    c.expect(records[i].humor == (v[2] + v[3]) / 2.0, "humor is not the mean");
    c.expect(allowed.count(records[i].coherency) && allowed.count(records[i].humor), "value outside grid");
  }
  bool rejected = false;
  try {
    make_annotation("x", {0, 2}, {1, 1});
  } catch (const Error&) {
    rejected = true;
  }
  c.expect(rejected, "out-of-range vote accepted");

  const HashedSentenceEncoder encoder(16, 5);
  ScorerConfig sc;
  sc.epochs = 50;
  LearnedScorer scorer(encoder.dim(), sc);
  scorer.train(records, encoder);
  Rng rng(51);
  double lo = 3.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd f(encoder.dim());
    const double scale = i < 100 ? 1.0 : 1e4;
    for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = scale * rng.normal();
    const auto p = scorer.predict(f);
    lo = std::min({lo, p.coherency, p.humor});
    hi = std::max({hi, p.coherency, p.humor});
  }
  c.expect(lo >= 1.0 && hi <= 3.0, "prediction outside [1, 3]");
  if (c.out.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu records are annotator means on the grid, predictions in [%.2f, %.2f]",
                  records.size(), lo, hi);
    c.out.detail = buf;
  }
  return c.out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"contrastive loss oracle", contrastive_oracle},
      {"closed-form loss cases", closed_forms},
      {"fusion model gradient check", gradient_check},
      {"metric oracles", metric_oracles},
      {"span corruption", span_corruption},
      {"end-to-end desk run", desk_run},
      {"prompt fixtures", prompt_fixtures},
      {"homophone invariant", homophones},
      {"annotation handling", annotations},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
