#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "resgrad/backend.hpp"
#include "resgrad/graph.hpp"
#include "resgrad/scripted_backend.hpp"

namespace resgrad::test {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(RESGRAD_SOURCE_DIR) / rel;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("resgrad_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline ComponentSpec llm_node(std::string id, std::vector<std::string> in, std::vector<std::string> out,
                              std::string prompt, bool optimizable = true) {
  ComponentSpec c;
  c.id = std::move(id);
  c.role_description = "Role of " + c.id;
  c.prompt_text = std::move(prompt);
  c.input_fields = std::move(in);
  c.output_fields = std::move(out);
  c.optimizable = optimizable;
  return c;
}

inline ComponentSpec tool_node(std::string id, std::vector<std::string> in, std::vector<std::string> out) {
  ComponentSpec c;
  c.id = std::move(id);
  c.role_description = "Tool " + c.id;
  c.input_fields = std::move(in);
  c.output_fields = std::move(out);
  c.is_tool = true;
  return c;
}

/// question -> n1 -> f1 -> n2 -> f2 ... -> nN -> fN, prompts "Prompt i."
inline Graph llm_chain(int n) {
  Graph g;
  g.task_inputs = {"question"};
  std::string prev = "question";
  for (int i = 1; i <= n; ++i) {
    const auto out = "f" + std::to_string(i);
    g.components.push_back(llm_node("n" + std::to_string(i), {prev}, {out}, "Prompt " + std::to_string(i) + "."));
    prev = out;
  }
  return g;
}

inline ScriptTable script(std::vector<ScriptRule> rules, std::string fallback) {
  ScriptTable t;
  t.rules = std::move(rules);
  t.fallback = std::move(fallback);
  return t;
}

inline ScriptRule rule_contains(std::string needle, std::string response) {
  ScriptRule r;
  r.contains = {std::move(needle)};
  r.responses = {std::move(response)};
  return r;
}

/// Scripted stub that fails with the given errors, in order, and then answers.
class FlakyBackend final : public Backend {
 public:
  FlakyBackend(std::vector<bool> failures_retryable, std::string answer)
      : failures_(std::move(failures_retryable)), answer_(std::move(answer)) {}
  ChatResponse complete(const ChatRequest& request) override {
    const auto n = static_cast<std::size_t>(calls_++);
    if (n < failures_.size()) throw BackendError(failures_[n], "scripted failure " + std::to_string(n + 1));
    return {answer_, estimate_usage(request, answer_)};
  }
  int calls() const { return calls_.load(); }

 private:
  std::vector<bool> failures_;
  std::string answer_;
  std::atomic<int> calls_{0};
};

}  // namespace resgrad::test
