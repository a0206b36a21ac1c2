#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resgrad/backend.hpp"
#include "resgrad/context.hpp"
#include "resgrad/graph.hpp"

namespace resgrad {

/// What one component saw and produced during a forward pass.
struct TrajectoryEntry {
  std::string component_id;
  Context input_slice;
  Context output;
  TokenUsage usage;
  /// The request sent to the backend; absent for tool nodes.
  std::optional<ChatRequest> request;
};

struct Trajectory {
  Context task_input;
  std::vector<TrajectoryEntry> entries;
  Context final_state;

  const TrajectoryEntry* find(std::string_view component_id) const noexcept;
  TrajectoryEntry* find(std::string_view component_id) noexcept;
};

/// Producer-side character caps, keyed by field name. A missing key means
/// the field is not capped.
struct TruncationPolicy {
  std::map<std::string, std::size_t> caps;
  std::size_t top_k = 20;

  /// Keeps the first `cap` characters of `value`.
  std::string apply(std::string_view field, std::string_view value) const;
  Context apply(const Context& delta) const;
};

inline constexpr std::size_t kTraceCharCap = 3000;
inline constexpr std::size_t kEvidenceCharCap = 1024;
inline constexpr std::size_t kRetrievalTopK = 20;

/// Resource limits used by sandboxed code execution. Recorded for
/// completeness; this library does not execute code.
struct SandboxLimits {
  static constexpr int max_as_limit_kb = 300;
  static constexpr int max_data_limit_kb = 300;
  static constexpr int max_stack_limit_kb = 300;
  static constexpr double min_time_limit_s = 2.0;
  static constexpr double gt_time_limit_s = 5.0;
};

enum class Metric { exact_match, f1 };
std::string_view to_string(Metric m) noexcept;
Metric metric_from_string(std::string_view s);

struct GoldSpec {
  std::string field;
  std::string value;
  Metric metric = Metric::exact_match;
};

using ToolFn = std::function<Context(const ComponentSpec&, const Context& inputs)>;

/// Tool callbacks keyed by component id. Components whose id starts with
/// "identity" fall back to identity_tool when nothing else is registered.
class ToolRegistry {
 public:
  void add(std::string component_id, ToolFn fn);
  /// Throws UnknownTool.
  const ToolFn& resolve(const ComponentSpec& component) const;

 private:
  std::map<std::string, ToolFn, std::less<>> tools_;
};

/// Copies input field i to output field i.
Context identity_tool(const ComponentSpec& component, const Context& inputs);

ChatRequest assemble_prompt(const ComponentSpec& component, const Context& inputs);

/// Strips surrounding whitespace and one enclosing ``` fence.
std::string postprocess_completion(std::string_view completion);

/// Splits a multi-output completion written as `<field>: value` lines.
/// Throws OutputArityMismatch when a declared field is missing or repeated.
Context split_outputs(std::string_view completion, const std::vector<std::string>& output_fields);

struct ComponentRun {
  Context delta;
  TrajectoryEntry entry;
};

ComponentRun run_component(const ComponentSpec& component, const Context& inputs, Backend& backend,
                           const TruncationPolicy& policy, const ToolRegistry& tools = {});

struct ForwardResult {
  Context final_context;
  Trajectory trajectory;
  std::optional<double> reward;
  TokenUsage total_tokens;
};

/// Raised when a component fails mid-pass; carries the entries completed
/// before the failure.
class ForwardError : public Error {
 public:
  ForwardError(std::string component_id, std::string cause, bool retryable, Trajectory partial)
      : Error("forward pass failed at '" + component_id + "': " + cause),
        component_id_(std::move(component_id)),
        retryable_(retryable),
        partial_(std::move(partial)) {}
  const std::string& component_id() const noexcept { return component_id_; }
  bool retryable() const noexcept { return retryable_; }
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  std::string component_id_;
  bool retryable_;
  Trajectory partial_;
};

ForwardResult run_forward(const Graph& graph, const Context& task_input, Backend& backend,
                          const TruncationPolicy& policy, const std::optional<GoldSpec>& gold = std::nullopt,
                          const ToolRegistry& tools = {});

/// Lowercase, trimmed, internal whitespace collapsed to single spaces.
std::string normalize_answer(std::string_view s);
double exact_match(std::string_view prediction, std::string_view gold);
double token_f1(std::string_view prediction, std::string_view gold);
/// Throws MissingField if the gold field is absent from `final_context`.
double compute_reward(const Context& final_context, const GoldSpec& gold);

}  // namespace resgrad
