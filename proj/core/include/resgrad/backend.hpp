#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "resgrad/errors.hpp"

namespace resgrad {

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total() const noexcept { return prompt_tokens + completion_tokens; }
  TokenUsage& operator+=(const TokenUsage& o) noexcept {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) noexcept { return a += b; }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

/// A single system + user turn.
struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_new_tokens = 1024;
  /// Empty selects the backend's configured model.
  std::string model;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
};

class BackendError : public Error {
 public:
  BackendError(bool retryable, std::string detail)
      : Error(std::string(retryable ? "retryable" : "fatal") + " backend error: " + detail),
        retryable_(retryable),
        detail_(std::move(detail)) {}
  bool retryable() const noexcept { return retryable_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  bool retryable_;
  std::string detail_;
};

/// Chat-completion contract. Implementations must tolerate concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// ceil(code points / 4); the fallback when a response carries no usage.
std::int64_t count_tokens(std::string_view text) noexcept;

/// Usage estimate for a request/response pair via count_tokens.
TokenUsage estimate_usage(const ChatRequest& request, std::string_view completion) noexcept;

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Calls `backend` up to `max_attempts` times, retrying only retryable
/// errors. Before retry n (1-based) it sleeps base_backoff * 2^(n-1).
ChatResponse with_retry(Backend& backend, const ChatRequest& request, int max_attempts,
                        std::chrono::milliseconds base_backoff, const Sleeper& sleep = {});

class RetryingBackend final : public Backend {
 public:
  RetryingBackend(std::shared_ptr<Backend> inner, int max_attempts, std::chrono::milliseconds base_backoff,
                  Sleeper sleep = {});
  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<Backend> inner_;
  int max_attempts_;
  std::chrono::milliseconds base_backoff_;
  Sleeper sleep_;
};

/// Decorator that counts calls and sums reported usage.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
  ChatResponse complete(const ChatRequest& request) override;

  std::int64_t calls() const noexcept { return calls_.load(); }
  TokenUsage usage() const;

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<std::int64_t> calls_{0};
  mutable std::mutex mu_;
  TokenUsage usage_;
};

/// Adapts a plain function; usage is estimated unless the function sets it.
class CallbackBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  ChatResponse complete(const ChatRequest& request) override;

 private:
  Fn fn_;
};

}  // namespace resgrad
