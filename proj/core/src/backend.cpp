#include "resgrad/backend.hpp"

#include <thread>

#include "resgrad/text.hpp"

namespace resgrad {

std::int64_t count_tokens(std::string_view text) noexcept {
  const auto chars = static_cast<std::int64_t>(utf8_length(text));
  return (chars + 3) / 4;
}

TokenUsage estimate_usage(const ChatRequest& request, std::string_view completion) noexcept {
  return {count_tokens(request.system) + count_tokens(request.user), count_tokens(completion)};
}

ChatResponse with_retry(Backend& backend, const ChatRequest& request, int max_attempts,
                        std::chrono::milliseconds base_backoff, const Sleeper& sleep) {
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  for (int attempt = 0;; ++attempt) {
    try {
      return backend.complete(request);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt + 1 >= max_attempts) throw;
    }
    const auto delay = base_backoff * (std::int64_t{1} << std::min(attempt, 20));
    if (sleep)
      sleep(delay);
    else
      std::this_thread::sleep_for(delay);
  }
}

RetryingBackend::RetryingBackend(std::shared_ptr<Backend> inner, int max_attempts,
                                 std::chrono::milliseconds base_backoff, Sleeper sleep)
    : inner_(std::move(inner)), max_attempts_(max_attempts), base_backoff_(base_backoff), sleep_(std::move(sleep)) {
  if (max_attempts_ < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

ChatResponse RetryingBackend::complete(const ChatRequest& request) {
  return with_retry(*inner_, request, max_attempts_, base_backoff_, sleep_);
}

ChatResponse CountingBackend::complete(const ChatRequest& request) {
  ++calls_;
  auto response = inner_->complete(request);
  std::lock_guard lock(mu_);
  usage_ += response.usage;
  return response;
}

TokenUsage CountingBackend::usage() const {
  std::lock_guard lock(mu_);
  return usage_;
}

ChatResponse CallbackBackend::complete(const ChatRequest& request) {
  ChatResponse r;
  r.text = fn_(request);
  r.usage = estimate_usage(request, r.text);
  return r;
}

}  // namespace resgrad
