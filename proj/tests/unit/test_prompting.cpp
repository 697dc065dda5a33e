// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#include "../support/golden.hpp"
#include "fixtures.hpp"
#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"
#include "xhy/prompting/client.hpp"
#include "xhy/prompting/prompt.hpp"

using namespace xhy;
using namespace xhy::prompting;

namespace {

corpus::AllegoricalSaying saying(std::string riddle, std::string explanation,
                                 std::string subject = {}) {
  corpus::AllegoricalSaying s;
  s.riddle = std::move(riddle);
  s.explanation = std::move(explanation);
  if (!subject.empty()) s.subject = std::move(subject);
  return s;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

class ScriptedClient : public ChatClient {
 public:
  std::vector<std::string> script;  // "!transient", "!auth" or a reply
  std::vector<ChatRequest> requests;
  std::string send(const ChatRequest& request) override {
    requests.push_back(request);
    const auto next = script.at(requests.size() - 1);
    if (next == "!transient") throw TransientError("HTTP 503");
    if (next == "!auth") fail(ErrorKind::kAuth, "bad key");
    return next;
  }
  std::string model_id() const override { return "stub-model"; }
};

RetryPolicy no_sleep(std::vector<long>* waits = nullptr) {
  RetryPolicy p;
  p.sleep = [waits](std::chrono::milliseconds ms) {
    if (waits) waits->push_back(ms.count());
  };
  return p;
}

}  // namespace

TEST_CASE("zero-shot prompt has description, instruction and query only") {
  const auto t = TemplateSet::load(test::assets_dir() / "templates");
  PromptSpec spec;
  spec.query = "咸菜烧豆腐";
  const auto text = render_prompt(spec, t);
  const auto ls = lines(text);
  REQUIRE(ls.size() == 3);
  CHECK(ls[0] == t.description);
  CHECK(ls[2] == "咸菜烧豆腐");
  CHECK_FALSE(text.ends_with("\n"));
  CHECK(text.find("——") == std::string::npos);
}

TEST_CASE("few-shot prompts place one demonstration per line") {
  const auto t = TemplateSet::load(test::assets_dir() / "templates");
  PromptSpec spec;
  for (int i = 0; i < 5; ++i) spec.demos.push_back(saying("谜" + std::to_string(i), "解", "谜"));
  spec.query = "豆腐";
  auto ls = lines(render_prompt(spec, t));
  REQUIRE(ls.size() == 8);
  for (int i = 1; i <= 5; ++i) CHECK(ls[i] == "谜" + std::to_string(i - 1) + "——解");

  spec.task = corpus::Task::kScratch;
  ls = lines(render_prompt(spec, t));
  CHECK(ls[1] == "谜：谜0——解");
  CHECK(ls.back() == "豆腐");

  spec.demos.push_back(saying("无主", "解"));
  CHECK_THROWS_AS(render_prompt(spec, t), Error);
}

TEST_CASE("rendered prompts match the golden files") {
  const auto t = TemplateSet::load(test::assets_dir() / "templates");
  const bool update = std::getenv("XHY_UPDATE_GOLDEN") != nullptr;
  for (const auto& g : test::golden_prompts()) {
    const auto text = render_prompt(g.spec, t);
    CHECK(text == render_prompt(g.spec, t));
    if (update) write_text(test::golden_dir() / g.file, text);
    CHECK_MESSAGE(text == read_text(test::golden_dir() / g.file), g.file);
  }
}

TEST_CASE("demo sampling") {
  std::vector<corpus::AllegoricalSaying> train;
  for (int i = 0; i < 20; ++i) train.push_back(saying("谜" + std::to_string(i), "解"));
  CHECK(sample_demos(train, 0, 1).empty());
  const auto a = sample_demos(train, 5, 3);
  const auto b = sample_demos(train, 5, 3);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a[i].riddle == b[i].riddle);
    distinct.insert(a[i].riddle);
  }
  CHECK(distinct.size() == 5);
  CHECK_THROWS_AS(sample_demos(train, 21, 3), Error);
}

TEST_CASE("responses are cleaned of echoes and whitespace") {
  CHECK(clean_response("  咸菜烧豆腐——有言（盐）在先\n", "咸菜烧豆腐") == "有言（盐）在先");
  CHECK(clean_response("有言在先 ", "咸菜烧豆腐") == "有言在先");
}

TEST_CASE("complete returns the reply and forwards temperature 0") {
  ScriptedClient client;
  client.script = {"有言（盐）在先"};
  HttpChatClient http("https://example.invalid/v1/chat/completions", "k", "m");
  CHECK(complete(client, "prompt", {}, no_sleep()) == "有言（盐）在先");
  const auto payload = http.payload(client.requests.at(0));
  CHECK(payload["temperature"] == 0.0);
  CHECK(payload["messages"][0]["content"] == "prompt");
  CHECK(payload["model"] == "m");
}

TEST_CASE("transient failures are retried with capped backoff and audited") {
  const auto dir = test::scratch_dir("audit");
  AuditLog audit(dir / "audit.jsonl");
  ScriptedClient client;
  client.script = {"!transient", "!transient", "ok"};
  std::vector<long> waits;
  auto policy = no_sleep(&waits);
  policy.initial_backoff = std::chrono::milliseconds(100);
  policy.max_backoff = std::chrono::milliseconds(150);
  CHECK(complete(client, "p", {}, policy, &audit) == "ok");
  CHECK(waits == std::vector<long>{100, 150});
  std::vector<Json> records;
  for_each_jsonl(audit.path(), [&](const Json& r, std::size_t) { records.push_back(r); });
  REQUIRE(records.size() == 3);
  CHECK(records[2]["status"] == "ok");
  CHECK(records[2]["response"] == "ok");
  CHECK(records[2]["model"] == "stub-model");
  CHECK(records[0].contains("timestamp"));

  ScriptedClient exhausted;
  exhausted.script = {"!transient", "!transient"};
  policy.max_attempts = 2;
  try {
    complete(exhausted, "p", {}, policy);
    FAIL("expected a transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTransport);
  }

  ScriptedClient denied;
  denied.script = {"!auth", "never"};
  try {
    complete(denied, "p", {}, policy);
    FAIL("expected an auth error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kAuth);
  }
  CHECK(denied.requests.size() == 1);
}

TEST_CASE("missing credentials are a configuration error") {
  unsetenv("XHY_LLM_API_KEY");
  CHECK_THROWS_AS(HttpChatClient::from_env(), Error);
}

TEST_CASE("request budget caps concurrency") {
  class SlowClient : public ChatClient {
   public:
    std::atomic<int> current{0}, peak{0};
    std::string send(const ChatRequest& r) override {
      const int now = ++current;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --current;
      return r.messages.back().content + "!";
    }
    std::string model_id() const override { return "slow"; }
  } client;
  std::vector<std::string> prompts;
  for (int i = 0; i < 12; ++i) prompts.push_back(std::to_string(i));
  const auto out = complete_all(client, prompts, {}, no_sleep(), nullptr, 3);
  CHECK(out[7] == "7!");
  CHECK(client.peak.load() <= 3);
}
