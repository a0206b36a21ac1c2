#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "resgrad/backend.hpp"

namespace resgrad {

/// Environment variable holding the bearer key. Never logged.
inline constexpr const char* kApiKeyEnv = "RESGRAD_API_KEY";

struct HttpBackendConfig {
  /// e.g. "https://api.openai.com/v1" or "http://127.0.0.1:8080/v1".
  std::string base_url;
  std::string model;
  /// Empty: read kApiKeyEnv at construction.
  std::string api_key;
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};
};

/// Client for the OpenAI-compatible POST {base_url}/chat/completions
/// endpoint. Stateless per call; wrap in RetryingBackend for retries.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ChatResponse complete(const ChatRequest& request) override;

  const HttpBackendConfig& config() const noexcept { return config_; }

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// Request body: exactly model, messages[system, user], temperature, max_tokens.
nlohmann::ordered_json build_chat_body(const ChatRequest& request, std::string_view default_model);

/// Parses choices[0].message.content and usage.{prompt,completion}_tokens.
/// Throws a non-retryable BackendError on malformed bodies.
ChatResponse parse_chat_response(std::string_view body, const ChatRequest& request);

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};
ParsedUrl split_base_url(std::string_view base_url);

}  // namespace resgrad
