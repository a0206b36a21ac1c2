#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resgrad/backend.hpp"

namespace resgrad {

/// One rule of a script. A rule matches when every `contains` substring and
/// the optional `pattern` (ECMAScript regex) occur in system + "\n" + user.
/// Responses of pattern rules may cite captures as $1, $2, ... or $&.
///
/// Each rule counts its own matches. With `calls` set, the rule only answers
/// on matches first..last (1-based, last == 0 meaning unbounded) and falls
/// through otherwise. `responses` are consumed in order per answered match,
/// sticking on the last one; with `random` set, one is drawn uniformly from
/// the backend's seeded generator instead.
struct ScriptRule {
  std::vector<std::string> contains;
  std::string pattern;
  std::optional<std::pair<int, int>> calls;
  std::vector<std::string> responses;
  bool random = false;
};

struct ScriptTable {
  std::vector<ScriptRule> rules;
  std::string fallback;

  static ScriptTable from_json(const nlohmann::json& j);
  static ScriptTable load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

/// Deterministic backend driven by a ScriptTable. The response is a pure
/// function of the request and the per-rule match counters; counter updates
/// are serialized. Under concurrent callers, rules with call-count conditions
/// see matches in arrival order.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(ScriptTable table, std::uint64_t seed = 42);

  ChatResponse complete(const ChatRequest& request) override;

  std::int64_t calls() const;
  /// Number of requests answered by the fallback.
  std::int64_t fallback_hits() const;

 private:
  struct CompiledRule {
    ScriptRule rule;
    std::optional<std::regex> regex;
  };

  std::vector<CompiledRule> rules_;
  std::string fallback_;
  mutable std::mutex mu_;
  std::vector<int> hits_;
  std::int64_t calls_ = 0;
  std::int64_t fallback_hits_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace resgrad
