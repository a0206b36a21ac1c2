#include "resgrad/scripted_backend.hpp"

#include "json_io.hpp"

namespace resgrad {

ScriptTable ScriptTable::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("script", 0, "top level must be an object");
  ScriptTable t;
  t.fallback = j.value("fallback", std::string());
  if (!j.contains("rules")) return t;
  if (!j["rules"].is_array()) throw ParseError("script", 0, "'rules' must be an array");
  for (std::size_t i = 0; i < j["rules"].size(); ++i) {
    const auto& rj = j["rules"][i];
    const std::string where = "script.rules[" + std::to_string(i) + "]";
    try {
      ScriptRule r;
      if (rj.contains("contains")) {
        if (rj["contains"].is_string())
          r.contains.push_back(rj["contains"].get<std::string>());
        else
          r.contains = rj["contains"].get<std::vector<std::string>>();
      }
      r.pattern = rj.value("pattern", std::string());
      if (rj.contains("calls")) {
        const auto& cj = rj["calls"];
        r.calls = std::make_pair(cj.value("from", 1), cj.value("to", 0));
      }
      if (rj.contains("response")) r.responses.push_back(rj["response"].get<std::string>());
      if (rj.contains("responses")) {
        auto more = rj["responses"].get<std::vector<std::string>>();
        r.responses.insert(r.responses.end(), more.begin(), more.end());
      }
      r.random = rj.value("random", false);
      if (r.responses.empty()) throw ParseError(where, 0, "rule has no response");
      t.rules.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where, 0, e.what());
    }
  }
  return t;
}

ScriptTable ScriptTable::load(const std::filesystem::path& path) {
  return from_json(detail::read_json_file(path));
}

nlohmann::ordered_json ScriptTable::to_json() const {
  nlohmann::ordered_json j;
  j["rules"] = nlohmann::ordered_json::array();
  for (const auto& r : rules) {
    nlohmann::ordered_json rj;
    if (!r.contains.empty()) rj["contains"] = r.contains;
    if (!r.pattern.empty()) rj["pattern"] = r.pattern;
    if (r.calls) rj["calls"] = {{"from", r.calls->first}, {"to", r.calls->second}};
    rj["responses"] = r.responses;
    if (r.random) rj["random"] = true;
    j["rules"].push_back(std::move(rj));
  }
  j["fallback"] = fallback;
  return j;
}

ScriptedBackend::ScriptedBackend(ScriptTable table, std::uint64_t seed)
    : fallback_(std::move(table.fallback)), rng_(seed) {
  for (auto& r : table.rules) {
    CompiledRule c{std::move(r), std::nullopt};
    if (!c.rule.pattern.empty()) {
      try {
        c.regex.emplace(c.rule.pattern, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw ParseError("script", 0, "bad pattern '" + c.rule.pattern + "': " + e.what());
      }
    }
    rules_.push_back(std::move(c));
  }
  hits_.assign(rules_.size(), 0);
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  const std::string haystack = request.system + "\n" + request.user;
  std::string text;
  {
    std::lock_guard lock(mu_);
    ++calls_;
    bool answered = false;
    for (std::size_t i = 0; i < rules_.size() && !answered; ++i) {
      const auto& [rule, regex] = rules_[i];
      std::smatch m;
      bool match = true;
      for (const auto& needle : rule.contains) {
        if (haystack.find(needle) == std::string::npos) {
          match = false;
          break;
        }
      }
      if (match && regex) match = std::regex_search(haystack, m, *regex);
      if (!match) continue;
      const int n = ++hits_[i];
      int first = 1;
      if (rule.calls) {
        first = rule.calls->first;
        const int last = rule.calls->second;
        if (n < first || (last > 0 && n > last)) continue;
      }
      std::size_t idx;
      if (rule.random) {
        idx = static_cast<std::size_t>(rng_() % rule.responses.size());
      } else {
        idx = std::min<std::size_t>(static_cast<std::size_t>(n - first), rule.responses.size() - 1);
      }
      text = regex ? m.format(rule.responses[idx]) : rule.responses[idx];
      answered = true;
    }
    if (!answered) {
      ++fallback_hits_;
      text = fallback_;
    }
  }
  ChatResponse r;
  r.usage = estimate_usage(request, text);
  r.text = std::move(text);
  return r;
}

std::int64_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::int64_t ScriptedBackend::fallback_hits() const {
  std::lock_guard lock(mu_);
  return fallback_hits_;
}

}  // namespace resgrad
