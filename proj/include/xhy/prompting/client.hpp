// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "xhy/core/error.hpp"
#include "xhy/core/io.hpp"

namespace xhy::prompting {

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::string content;
};

struct CompletionParams {
  double temperature = 0.0;
  int max_tokens = 128;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  CompletionParams params;
};

// A failure worth retrying: connection errors, timeouts, 429 and 5xx.
class TransientError : public Error {
 public:
  explicit TransientError(const std::string& message) : Error(ErrorKind::kTransport, message) {}
};

// Minimal chat-completion interface. Implementations throw TransientError for
// retryable failures and Error(kAuth) for rejected credentials.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string send(const ChatRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

// OpenAI-compatible /chat/completions over HTTP(S).
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(std::string endpoint, std::string api_key, std::string model,
                 std::chrono::seconds timeout = std::chrono::seconds(60));
  // Reads XHY_LLM_ENDPOINT, XHY_LLM_API_KEY and XHY_LLM_MODEL; throws
  // Error(kConfig) naming whichever is unset.
  static HttpChatClient from_env();

  std::string send(const ChatRequest& request) override;
  std::string model_id() const override { return model_; }

  Json payload(const ChatRequest& request) const;

 private:
  std::string endpoint_;
  std::string api_key_;
  std::string model_;
  std::chrono::seconds timeout_;
};

// Serialized JSONL audit trail: one record per attempt with the prompt,
// the response or error, the model id and a UTC timestamp.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path);
  void record(const std::string& prompt, const std::string& model_id, int attempt,
              const std::string& status, const std::string& text);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  // Replaceable so tests do not sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Sends prompt as a single user message (after an optional system message).
// Transient failures back off exponentially, doubling from initial_backoff up
// to max_backoff. Auth failures propagate at once; exhausted retries raise
// Error(kTransport).
std::string complete(ChatClient& client, const std::string& prompt, const CompletionParams& params,
                     const RetryPolicy& policy = {}, AuditLog* audit = nullptr,
                     const std::string& system = {});

// Caps the number of in-flight requests across threads.
class RequestBudget {
 public:
  explicit RequestBudget(int limit);
  void acquire();
  void release();
  int in_flight() const;

 private:
  int limit_;
  int used_ = 0;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
};

// complete() over many prompts with at most `concurrency` requests in
// flight. Results keep prompt order.
std::vector<std::string> complete_all(ChatClient& client, const std::vector<std::string>& prompts,
                                      const CompletionParams& params, const RetryPolicy& policy,
                                      AuditLog* audit, int concurrency);

}  // namespace xhy::prompting
