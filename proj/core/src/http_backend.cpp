#include "resgrad/http_backend.hpp"

#include <cstdlib>

#ifdef RESGRAD_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace resgrad {

ParsedUrl split_base_url(std::string_view base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string_view::npos) throw BackendError(false, "base_url needs a scheme: " + std::string(base_url));
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string_view::npos) {
    out.scheme_host_port = std::string(base_url);
  } else {
    out.scheme_host_port = std::string(base_url.substr(0, path_start));
    out.path = std::string(base_url.substr(path_start));
  }
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty()) {
    if (const char* key = std::getenv(kApiKeyEnv)) config_.api_key = key;
  }
  auto parsed = split_base_url(config_.base_url);
  scheme_host_port_ = std::move(parsed.scheme_host_port);
  path_prefix_ = std::move(parsed.path);
}

nlohmann::ordered_json build_chat_body(const ChatRequest& request, std::string_view default_model) {
  nlohmann::ordered_json j;
  j["model"] = request.model.empty() ? std::string(default_model) : request.model;
  j["messages"] = nlohmann::ordered_json::array({
      {{"role", "system"}, {"content", request.system}},
      {{"role", "user"}, {"content", request.user}},
  });
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_new_tokens;
  return j;
}

ChatResponse parse_chat_response(std::string_view body, const ChatRequest& request) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BackendError(false, "response is not a JSON object");
  const auto& choices = j.value("choices", nlohmann::json());
  if (!choices.is_array() || choices.empty() || !choices[0].is_object())
    throw BackendError(false, "response has no choices");
  const auto& message = choices[0].value("message", nlohmann::json());
  if (!message.is_object() || !message.contains("content") || !message["content"].is_string())
    throw BackendError(false, "choices[0].message.content missing");

  ChatResponse r;
  r.text = message["content"].get<std::string>();
  const auto& usage = j.value("usage", nlohmann::json());
  if (usage.is_object() && usage.contains("prompt_tokens") && usage.contains("completion_tokens") &&
      usage["prompt_tokens"].is_number_integer() && usage["completion_tokens"].is_number_integer()) {
    r.usage.prompt_tokens = usage["prompt_tokens"].get<std::int64_t>();
    r.usage.completion_tokens = usage["completion_tokens"].get<std::int64_t>();
    if (r.usage.prompt_tokens < 0 || r.usage.completion_tokens < 0)
      throw BackendError(false, "negative usage counts");
  } else {
    r.usage = estimate_usage(request, r.text);
  }
  return r;
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  if (!client.is_valid()) throw BackendError(false, "unsupported base_url: " + config_.base_url);
  client.set_connection_timeout(config_.connect_timeout);
  client.set_read_timeout(config_.read_timeout);

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto body = build_chat_body(request, config_.model).dump();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
  if (!res) throw BackendError(true, "request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw BackendError(true, "http status " + std::to_string(res->status));
  if (res->status < 200 || res->status >= 300)
    throw BackendError(false, "http status " + std::to_string(res->status));
  return parse_chat_response(res->body, request);
}

}  // namespace resgrad
