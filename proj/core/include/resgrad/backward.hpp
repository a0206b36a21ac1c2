#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "resgrad/backend.hpp"
#include "resgrad/forward.hpp"
#include "resgrad/graph.hpp"

namespace resgrad {

/// Feedback arriving at a node: the critique of the final output for the
/// sink, or upstream feedback routed from a consumer.
struct ObjectiveFeedback {
  std::string text;
  std::string source = "objective";
};

/// STOP_GRADIENT: the upstream output is valid, propagation ends here.
struct Stop {
  friend bool operator==(const Stop&, const Stop&) = default;
};
struct Feedback {
  std::string text;
  friend bool operator==(const Feedback&, const Feedback&) = default;
};
using Upstream = std::variant<Stop, Feedback>;

enum class FaultClass { pure_local, pure_upstream, mixed, none };
std::string_view to_string(FaultClass c) noexcept;

/// The analyst's decomposition of a node's feedback. An empty local
/// critique is stored as absent, so "no local + Stop" means nothing
/// actionable anywhere (FaultClass::none).
struct RoutedFeedback {
  std::optional<std::string> local;
  Upstream upstream = Stop{};

  bool stops() const noexcept { return std::holds_alternative<Stop>(upstream); }
  const std::string* upstream_text() const noexcept;
  FaultClass fault_class() const noexcept;

  friend bool operator==(const RoutedFeedback&, const RoutedFeedback&) = default;
};

/// Total parser for the two-section LOCAL/UPSTREAM format. Headers are
/// matched case-insensitively on their own line (markdown emphasis and
/// trailing text on the header line allowed). Missing either header: the
/// whole completion becomes LOCAL and upstream is Stop.
RoutedFeedback parse_routed(std::string_view completion);

/// True when `section` is the STOP_GRADIENT token, ignoring case,
/// surrounding whitespace and surrounding punctuation.
bool is_stop_token(std::string_view section);

struct ProjectorSettings {
  double temperature = 0.4;
  int max_new_tokens = 1024;
  std::string model;
};

inline constexpr std::size_t kVariableShortChars = 512;
inline constexpr std::size_t kContextSnippetChars = 512;

ChatRequest build_backward_prompt(const ComponentSpec& component, const TrajectoryEntry& entry,
                                  const ObjectiveFeedback& incoming, const std::vector<std::string>& consumers,
                                  const ProjectorSettings& settings = {});

/// Per-node gradient density: locally routed critiques since the last update.
class DensityTable {
 public:
  DensityTable() = default;
  explicit DensityTable(const std::vector<std::string>& component_ids);

  bool contains(std::string_view id) const noexcept;
  int rho(std::string_view id) const;
  int t_last(std::string_view id) const;
  void increment(std::string_view id);
  /// ρ ← 0, t_last ← step.
  void reset(std::string_view id, int step);
  std::vector<std::string> ids() const;

  friend bool operator==(const DensityTable&, const DensityTable&) = default;

 private:
  struct Slot {
    std::string id;
    int rho = 0;
    int t_last = 0;
    friend bool operator==(const Slot&, const Slot&) = default;
  };
  Slot& slot(std::string_view id);
  const Slot& slot(std::string_view id) const;
  std::vector<Slot> slots_;
};

/// ρ += 1 iff routed.local is present. Throws UnknownComponent.
void record_density(DensityTable& densities, std::string_view component_id, const RoutedFeedback& routed,
                    int step);

struct FeedbackItem {
  int step = 0;
  std::string local_text;
  std::string context_snippet;
  friend bool operator==(const FeedbackItem&, const FeedbackItem&) = default;
};

/// Per-node local critiques awaiting the next prompt update.
class FeedbackBuffer {
 public:
  void append(std::string_view id, FeedbackItem item);
  const std::vector<FeedbackItem>& entries(std::string_view id) const;
  void clear(std::string_view id);
  std::size_t size(std::string_view id) const { return entries(id).size(); }

  friend bool operator==(const FeedbackBuffer&, const FeedbackBuffer&) = default;

 private:
  std::vector<std::pair<std::string, std::vector<FeedbackItem>>> buffers_;
};

struct NodeRouting {
  enum class Action { projected, pass_through };
  std::string component_id;
  Action action = Action::projected;
  ObjectiveFeedback incoming;
  /// Set for projected nodes.
  std::optional<RoutedFeedback> routed;
  std::string context_snippet;
  TokenUsage usage;
  /// Predecessors that received upstream feedback from this node.
  std::vector<std::string> routed_to;
};

/// Everything one example's backward pass decided, in processing order
/// (reverse topological). Produced without touching shared state so that
/// examples can be routed concurrently and folded by a single writer.
struct BackwardReport {
  std::vector<NodeRouting> nodes;
  int projector_calls = 0;
  int stop_events = 0;
  std::int64_t feedback_tokens = 0;
  /// Upstream feedback from a node with no component predecessors.
  std::vector<std::string> reached_input_from;
  /// A node with several producers received the same feedback text on each edge.
  bool fan_in = false;
  /// Set when the projector failed; nodes holds what was routed before.
  std::optional<std::string> error;

  const NodeRouting* find(std::string_view component_id) const noexcept;
};

/// Walks the trajectory in reverse order starting from the last component.
/// Tool nodes forward their incoming feedback unchanged to their producers;
/// LLM nodes are projected. A projector BackendError ends the walk and is
/// recorded in `error`.
BackwardReport route_feedback(const Graph& graph, const Trajectory& trajectory, const ObjectiveFeedback& objective,
                              Backend& projector, const ProjectorSettings& settings = {});

/// Folds a report into the shared tables: local critiques of optimizable
/// nodes are buffered and counted.
void apply_routing(const Graph& graph, const BackwardReport& report, DensityTable& densities,
                   FeedbackBuffer& buffers, int step);

/// route_feedback + apply_routing. Rethrows the projector's error after
/// folding the nodes routed before it.
BackwardReport backward_pass(const Graph& graph, const Trajectory& trajectory, const ObjectiveFeedback& objective,
                             Backend& projector, DensityTable& densities, FeedbackBuffer& buffers, int step,
                             const ProjectorSettings& settings = {});

/// One exported line per projected node.
struct RoutingRecord {
  int step = 0;
  int example = 0;
  std::string component;
  bool local_present = false;
  bool upstream_feedback = false;
  std::int64_t feedback_tokens = 0;
};

std::vector<RoutingRecord> routing_records(const BackwardReport& report, int step, int example);

/// Deterministic g_L for a failed example.
std::string critique(std::string_view answer, double reward, std::string_view gold, Metric metric);

}  // namespace resgrad
