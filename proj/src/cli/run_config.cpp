// SPDX-License-Identifier: Apache-2.0
#include "xhy/cli/run_config.hpp"

#include <set>

#include "xhy/core/error.hpp"
#include "xhy/core/random.hpp"

namespace xhy::cli {

namespace fs = std::filesystem;

namespace {

// Reads known keys out of one JSON object and rejects the rest.
class Section {
 public:
  Section(const Json& json, std::string name) : json_(json), name_(std::move(name)) {
    require(json.is_object(), ErrorKind::kConfig, name_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!json_.contains(key)) return;
    try {
      out = json_.at(key).get<T>();
    } catch (const Json::exception& e) {
      fail(ErrorKind::kConfig, name_ + "." + key + ": " + e.what());
    }
  }

  void path(const char* key, fs::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return json_.contains(key);
  }
  const Json& at(const char* key) const { return json_.at(key); }

  void finish() const {
    for (const auto& [key, value] : json_.items()) {
      require(seen_.count(key) > 0, ErrorKind::kConfig,
              "unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const Json& json_;
  std::string name_;
  std::set<std::string, std::less<>> seen_;
};

void read_optimizer(Section& parent, const char* key, AdamWConfig& out, const std::string& name) {
  if (!parent.has(key)) return;
  Section s(parent.at(key), name + "." + key);
  s.get("lr", out.lr);
  s.get("beta1", out.beta1);
  s.get("beta2", out.beta2);
  s.get("eps", out.eps);
  s.get("weight_decay", out.weight_decay);
  s.get("warmup_steps", out.warmup_steps);
  s.get("clip_norm", out.clip_norm);
  s.finish();
}

OrderedJson optimizer_json(const AdamWConfig& c) {
  OrderedJson j;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["weight_decay"] = c.weight_decay;
  j["warmup_steps"] = c.warmup_steps;
  j["clip_norm"] = c.clip_norm;
  return j;
}

}  // namespace

fs::path RunConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

void RunConfig::finalize() {
  stage1.seed = derive_seed(seed, "stage1");
  stage2.seed = derive_seed(seed, "stage2");
  stage3.seed = derive_seed(seed, "stage3");
  stage3.task = task;
  score.scorer.seed = derive_seed(seed, "scorer");
  tokenizer.num_sentinels = model.num_sentinels;
  stage1.span.sentinel_budget = model.num_sentinels;
  stage1.span.first_sentinel = model::Tokenizer::kFirstSentinel;
}

void RunConfig::validate() const {
  model.validate();
  stage1.span.validate();
  metrics.metric.validate();
  require(stage1.steps > 0 && stage1.batch_size > 0, ErrorKind::kConfig,
          "stage1 steps and batch_size must be positive");
  require(stage2.epochs > 0 && stage2.batch_size >= 2, ErrorKind::kConfig,
          "stage2 needs epochs > 0 and batch_size >= 2");
  require(stage2.tau > 0.0, ErrorKind::kConfig, "stage2.tau must be positive");
  require(stage3.epochs > 0 && stage3.batch_size > 0, ErrorKind::kConfig,
          "stage3 epochs and batch_size must be positive");
  require(split.train > 0 && split.validation > 0 && split.test > 0, ErrorKind::kConfig,
          "split ratios must be positive");
  require(prompt.shots >= 0 && prompt.concurrency > 0 && prompt.max_attempts > 0,
          ErrorKind::kConfig, "prompt shots, concurrency and max_attempts out of range");
  require(prompt.language == "zh" || prompt.language == "en", ErrorKind::kConfig,
          "prompt.language must be zh or en");
  require(metrics.embedder == "model" || metrics.embedder == "hashed", ErrorKind::kConfig,
          "metrics.embedder must be model or hashed");
  require(score.encoder == "model" || score.encoder == "hashed", ErrorKind::kConfig,
          "score.encoder must be model or hashed");
  require(generation.temperature > 0.0, ErrorKind::kConfig, "generation.temperature must be positive");
  auto exists = [&](const fs::path& p, const char* what) {
    require(fs::exists(resolve(p)), ErrorKind::kConfig,
            std::string(what) + " not found: " + resolve(p).string());
  };
  exists(paths.corpus, "paths.corpus");
  exists(paths.lexicon, "paths.lexicon");
  exists(paths.words, "paths.words");
  exists(paths.templates, "paths.templates");
  if (!paths.annotations.empty()) exists(paths.annotations, "paths.annotations");
  if (!paths.backbone.empty()) exists(paths.backbone, "paths.backbone");
  for (const auto& p : paths.stage1_corpus) exists(p, "paths.stage1_corpus entry");
}

RunConfig default_config() {
  RunConfig c;
  c.model.d_model = 64;
  c.model.n_heads = 4;
  c.model.n_enc_layers = 2;
  c.model.n_dec_layers = 2;
  c.model.d_ff = 256;
  c.model.pinyin_dim = 64;
  c.model.conv_filters = 64;
  c.model.fan_in_init = true;
  c.tokenizer.vocab_size = 2000;

  c.stage1.steps = 300;
  c.stage1.batch_size = 16;
  c.stage1.checkpoint_every = 100;
  c.stage1.optimizer.lr = 1e-3;
  c.stage1.optimizer.warmup_steps = 30;
  c.stage2.epochs = 10;
  c.stage2.batch_size = 32;
  c.stage2.optimizer.lr = 1e-3;
  c.stage3.epochs = 20;
  c.stage3.batch_size = 16;
  c.stage3.optimizer.lr = 1e-3;
  c.finalize();
  return c;
}

RunConfig parse_config(const Json& json, const fs::path& base_dir) {
  RunConfig c = default_config();
  c.base_dir = base_dir;
  Section root(json, "config");
  root.get("seed", c.seed);
  if (root.has("task")) {
    std::string task;
    root.get("task", task);
    try {
      c.task = corpus::parse_task(task);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, e.what());
    }
  }
  if (root.has("paths")) {
    Section s(root.at("paths"), "paths");
    s.path("corpus", c.paths.corpus);
    s.path("lexicon", c.paths.lexicon);
    s.path("words", c.paths.words);
    s.path("templates", c.paths.templates);
    s.path("work", c.paths.work);
    s.path("annotations", c.paths.annotations);
    s.path("backbone", c.paths.backbone);
    if (s.has("stage1_corpus")) {
      std::vector<std::string> files;
      s.get("stage1_corpus", files);
      c.paths.stage1_corpus.assign(files.begin(), files.end());
    }
    s.finish();
  }
  if (root.has("split")) {
    Section s(root.at("split"), "split");
    s.get("train", c.split.train);
    s.get("validation", c.split.validation);
    s.get("test", c.split.test);
    s.finish();
  }
  if (root.has("tokenizer")) {
    Section s(root.at("tokenizer"), "tokenizer");
    s.get("vocab_size", c.tokenizer.vocab_size);
    s.get("max_piece_length", c.tokenizer.max_piece_length);
    s.get("min_piece_count", c.tokenizer.min_piece_count);
    s.get("em_iterations", c.tokenizer.em_iterations);
    s.get("shrink_factor", c.tokenizer.shrink_factor);
    s.finish();
  }
  if (root.has("model")) {
    // the tokenizer decides the vocabulary size
    Json m = root.at("model");
    require(!m.contains("vocab_size"), ErrorKind::kConfig,
            "model.vocab_size is taken from the tokenizer; set tokenizer.vocab_size instead");
    Json merged = model::to_json(c.model);
    for (const auto& [k, v] : m.items()) merged[k] = v;
    c.model = model::config_from_json(merged);
  }
  if (root.has("stage1")) {
    Section s(root.at("stage1"), "stage1");
    s.get("steps", c.stage1.steps);
    s.get("batch_size", c.stage1.batch_size);
    s.get("checkpoint_every", c.stage1.checkpoint_every);
    s.get("log_every", c.stage1.log_every);
    s.get("noise_density", c.stage1.span.noise_density);
    s.get("mean_span_length", c.stage1.span.mean_span_length);
    read_optimizer(s, "optimizer", c.stage1.optimizer, "stage1");
    s.finish();
  }
  if (root.has("stage2")) {
    Section s(root.at("stage2"), "stage2");
    s.get("epochs", c.stage2.epochs);
    s.get("batch_size", c.stage2.batch_size);
    s.get("tau", c.stage2.tau);
    read_optimizer(s, "optimizer", c.stage2.optimizer, "stage2");
    s.finish();
  }
  if (root.has("stage3")) {
    Section s(root.at("stage3"), "stage3");
    s.get("epochs", c.stage3.epochs);
    s.get("batch_size", c.stage3.batch_size);
    read_optimizer(s, "optimizer", c.stage3.optimizer, "stage3");
    s.finish();
  }
  if (root.has("generation")) {
    Section s(root.at("generation"), "generation");
    s.get("sampling", c.generation.sampling);
    s.get("temperature", c.generation.temperature);
    s.get("max_gen_len", c.generation.max_gen_len);
    s.finish();
  }
  if (root.has("prompt")) {
    Section s(root.at("prompt"), "prompt");
    s.get("language", c.prompt.language);
    s.get("shots", c.prompt.shots);
    s.get("system", c.prompt.system);
    s.get("temperature", c.prompt.temperature);
    s.get("max_tokens", c.prompt.max_tokens);
    s.get("concurrency", c.prompt.concurrency);
    s.get("max_attempts", c.prompt.max_attempts);
    s.finish();
  }
  if (root.has("metrics")) {
    Section s(root.at("metrics"), "metrics");
    s.get("bleu_max_n", c.metrics.metric.bleu_max_n);
    s.get("bleu_weights", c.metrics.metric.bleu_weights);
    s.get("bleu_smoothing_epsilon", c.metrics.metric.bleu_smoothing_epsilon);
    s.get("rouge_beta", c.metrics.metric.rouge_beta);
    s.get("embedder", c.metrics.embedder);
    s.get("bertscore_f1", c.metrics.bertscore_f1);
    s.path("outputs", c.metrics.outputs);
    s.finish();
  }
  if (root.has("score")) {
    Section s(root.at("score"), "score");
    s.get("hidden", c.score.scorer.hidden);
    s.get("epochs", c.score.scorer.epochs);
    s.get("encoder", c.score.encoder);
    s.get("hashed_dim", c.score.hashed_dim);
    read_optimizer(s, "optimizer", c.score.scorer.optimizer, "score");
    s.finish();
  }
  root.finish();
  c.finalize();
  return c;
}

RunConfig load_config(const fs::path& path) {
  Json json;
  try {
    json = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return parse_config(json);
}

OrderedJson to_json(const RunConfig& c) {
  OrderedJson j;
  j["seed"] = c.seed;
  j["task"] = std::string(corpus::to_string(c.task));
  OrderedJson paths;
  paths["corpus"] = c.paths.corpus.string();
  paths["lexicon"] = c.paths.lexicon.string();
  paths["words"] = c.paths.words.string();
  paths["templates"] = c.paths.templates.string();
  paths["work"] = c.paths.work.string();
  paths["annotations"] = c.paths.annotations.string();
  paths["backbone"] = c.paths.backbone.string();
  paths["stage1_corpus"] = OrderedJson::array();
  for (const auto& p : c.paths.stage1_corpus) paths["stage1_corpus"].push_back(p.string());
  j["paths"] = paths;
  j["split"] = {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}};
  j["tokenizer"] = {{"vocab_size", c.tokenizer.vocab_size},
                    {"max_piece_length", c.tokenizer.max_piece_length},
                    {"min_piece_count", c.tokenizer.min_piece_count},
                    {"em_iterations", c.tokenizer.em_iterations},
                    {"shrink_factor", c.tokenizer.shrink_factor}};
  auto model = model::to_json(c.model);
  model.erase("vocab_size");
  j["model"] = model;
  OrderedJson s1;
  s1["steps"] = c.stage1.steps;
  s1["batch_size"] = c.stage1.batch_size;
  s1["checkpoint_every"] = c.stage1.checkpoint_every;
  s1["log_every"] = c.stage1.log_every;
  s1["noise_density"] = c.stage1.span.noise_density;
  s1["mean_span_length"] = c.stage1.span.mean_span_length;
  s1["optimizer"] = optimizer_json(c.stage1.optimizer);
  j["stage1"] = s1;
  OrderedJson s2;
  s2["epochs"] = c.stage2.epochs;
  s2["batch_size"] = c.stage2.batch_size;
  s2["tau"] = c.stage2.tau;
  s2["optimizer"] = optimizer_json(c.stage2.optimizer);
  j["stage2"] = s2;
  OrderedJson s3;
  s3["epochs"] = c.stage3.epochs;
  s3["batch_size"] = c.stage3.batch_size;
  s3["optimizer"] = optimizer_json(c.stage3.optimizer);
  j["stage3"] = s3;
  j["generation"] = {{"sampling", c.generation.sampling},
                     {"temperature", c.generation.temperature},
                     {"max_gen_len", c.generation.max_gen_len}};
  OrderedJson p;
  p["language"] = c.prompt.language;
  p["shots"] = c.prompt.shots;
  p["system"] = c.prompt.system;
  p["temperature"] = c.prompt.temperature;
  p["max_tokens"] = c.prompt.max_tokens;
  p["concurrency"] = c.prompt.concurrency;
  p["max_attempts"] = c.prompt.max_attempts;
  j["prompt"] = p;
  OrderedJson m;
  m["bleu_max_n"] = c.metrics.metric.bleu_max_n;
  m["bleu_weights"] = c.metrics.metric.weights();
  m["bleu_smoothing_epsilon"] = c.metrics.metric.bleu_smoothing_epsilon;
  m["rouge_beta"] = c.metrics.metric.rouge_beta;
  m["embedder"] = c.metrics.embedder;
  m["bertscore_f1"] = c.metrics.bertscore_f1;
  m["outputs"] = c.metrics.outputs.string();
  j["metrics"] = m;
  OrderedJson sc;
  sc["hidden"] = c.score.scorer.hidden;
  sc["epochs"] = c.score.scorer.epochs;
  sc["encoder"] = c.score.encoder;
  sc["hashed_dim"] = c.score.hashed_dim;
  sc["optimizer"] = optimizer_json(c.score.scorer.optimizer);
  j["score"] = sc;
  return j;
}

}  // namespace xhy::cli
