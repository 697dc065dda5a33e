// SPDX-License-Identifier: Apache-2.0
#include "xhy/prompting/client.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <ctime>
#include <exception>
#include <thread>

namespace xhy::prompting {
namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string env(const char* name) {
  const char* v = std::getenv(name);
  require(v != nullptr && *v != '\0', ErrorKind::kConfig,
          std::string("environment variable ") + name + " is not set");
  return v;
}

// Splits "https://host:port/path" into ("https://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  require(scheme != std::string::npos, ErrorKind::kConfig, "endpoint must be an http(s) URL: " + url);
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

}  // namespace

HttpChatClient::HttpChatClient(std::string endpoint, std::string api_key, std::string model,
                               std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      timeout_(timeout) {}

HttpChatClient HttpChatClient::from_env() {
  return HttpChatClient(env("XHY_LLM_ENDPOINT"), env("XHY_LLM_API_KEY"), env("XHY_LLM_MODEL"));
}

Json HttpChatClient::payload(const ChatRequest& request) const {
  Json messages = Json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", model_},
          {"messages", messages},
          {"temperature", request.params.temperature},
          {"max_tokens", request.params.max_tokens}};
}

std::string HttpChatClient::send(const ChatRequest& request) {
  const auto [base, path] = split_url(endpoint_);
  httplib::Client http(base);
  http.set_connection_timeout(timeout_);
  http.set_read_timeout(timeout_);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  const auto result = http.Post(path, headers, payload(request).dump(), "application/json");
  if (!result) throw TransientError("request failed: " + httplib::to_string(result.error()));
  const int status = result->status;
  if (status == 401 || status == 403) {
    fail(ErrorKind::kAuth, "endpoint rejected the configured credentials (HTTP " +
                               std::to_string(status) + "); check XHY_LLM_API_KEY");
  }
  if (status == 429 || status >= 500) throw TransientError("HTTP " + std::to_string(status));
  if (status != 200) {
    fail(ErrorKind::kTransport, "HTTP " + std::to_string(status) + ": " + result->body);
  }
  try {
    const auto body = Json::parse(result->body);
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kTransport, std::string("unexpected response body: ") + e.what());
  }
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {}

void AuditLog::record(const std::string& prompt, const std::string& model_id, int attempt,
                      const std::string& status, const std::string& text) {
  OrderedJson r;
  r["timestamp"] = utc_timestamp();
  r["model"] = model_id;
  r["attempt"] = attempt;
  r["status"] = status;
  r["prompt"] = prompt;
  r[status == "ok" ? "response" : "error"] = text;
  std::lock_guard lock(mutex_);
  append_line(path_, r.dump());
}

std::string complete(ChatClient& client, const std::string& prompt, const CompletionParams& params,
                     const RetryPolicy& policy, AuditLog* audit, const std::string& system) {
  require(policy.max_attempts >= 1, ErrorKind::kConfig, "max_attempts must be >= 1");
  ChatRequest request;
  if (!system.empty()) request.messages.push_back({"system", system});
  request.messages.push_back({"user", prompt});
  request.params = params;
  auto backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      std::string reply = client.send(request);
      if (audit) audit->record(prompt, client.model_id(), attempt, "ok", reply);
      return reply;
    } catch (const TransientError& e) {
      if (audit) audit->record(prompt, client.model_id(), attempt, "transient", e.what());
      if (attempt >= policy.max_attempts) {
        fail(ErrorKind::kTransport, "giving up after " + std::to_string(attempt) +
                                        " attempts: " + e.what());
      }
      spdlog::warn("attempt {} failed ({}), retrying in {} ms", attempt, e.what(), backoff.count());
      if (policy.sleep) {
        policy.sleep(backoff);
      } else {
        std::this_thread::sleep_for(backoff);
      }
      backoff = std::min(backoff * 2, policy.max_backoff);
    } catch (const Error& e) {
      if (audit) audit->record(prompt, client.model_id(), attempt, "fatal", e.what());
      throw;
    }
  }
}

RequestBudget::RequestBudget(int limit) : limit_(limit) {
  require(limit >= 1, ErrorKind::kConfig, "request budget must be >= 1");
}

void RequestBudget::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return used_ < limit_; });
  ++used_;
}

void RequestBudget::release() {
  {
    std::lock_guard lock(mutex_);
    --used_;
  }
  cv_.notify_one();
}

int RequestBudget::in_flight() const {
  std::lock_guard lock(mutex_);
  return used_;
}

std::vector<std::string> complete_all(ChatClient& client, const std::vector<std::string>& prompts,
                                      const CompletionParams& params, const RetryPolicy& policy,
                                      AuditLog* audit, int concurrency) {
  RequestBudget budget(concurrency);
  std::vector<std::string> results(prompts.size());
  std::vector<std::exception_ptr> errors(prompts.size());
  std::vector<std::thread> workers;
  workers.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    budget.acquire();
    workers.emplace_back([&, i] {
      try {
        results[i] = complete(client, prompts[i], params, policy, audit);
      } catch (...) {
        errors[i] = std::current_exception();
      }
      budget.release();
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace xhy::prompting
