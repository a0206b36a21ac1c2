#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "resgrad/context.hpp"

namespace resgrad {

/// Id of the virtual component that produces the task input fields.
inline constexpr std::string_view kTaskInputId = "__input__";

struct DecodingConfig {
  double temperature = 0.0;
  int max_new_tokens = 1024;
  friend bool operator==(const DecodingConfig&, const DecodingConfig&) = default;
};

/// One node of the computation graph. `prompt_text` is the optimizable
/// variable; `role_description` is what the backward analyst is told the
/// prompt is for.
struct ComponentSpec {
  std::string id;
  std::string role_description;
  std::string prompt_text;
  std::vector<std::string> input_fields;
  std::vector<std::string> output_fields;
  bool optimizable = false;
  bool is_tool = false;
  DecodingConfig decoding;
  /// Optional per-component model override; empty means the backend default.
  std::string model;

  friend bool operator==(const ComponentSpec&, const ComponentSpec&) = default;
};

/// Components in execution order. Edges are implied: a component consumes a
/// field produced by the task input or by an earlier component.
struct Graph {
  std::vector<std::string> task_inputs;
  std::vector<ComponentSpec> components;

  const ComponentSpec* find(std::string_view id) const noexcept;
  ComponentSpec* find(std::string_view id) noexcept;
  /// Throws UnknownComponent.
  const ComponentSpec& at(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

struct Violation {
  enum class Kind {
    invalid_id,
    duplicate_id,
    invalid_field_name,
    empty_fields,
    duplicate_field,
    optimizable_tool,
    empty_prompt,
    invalid_decoding,
    unbound_input,
    forward_reference,
    duplicate_output,
  };
  Kind kind;
  std::string component;
  std::string field;
  std::string message;
};

std::string_view to_string(Violation::Kind kind) noexcept;

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::vector<std::string> messages() const;
};

bool is_valid_field_name(std::string_view name) noexcept;

/// Reports every invariant violation; never throws.
ValidationReport validate_graph(const Graph& graph);

/// Declaration order, after checking it is a valid topological order.
/// Throws CycleOrForwardReference otherwise.
std::vector<std::string> topological_order(const Graph& graph);

/// Π: the declared input slice of `context` for `component`.
Context project_inputs(const Context& context, const ComponentSpec& component);

/// Components (never the task input) producing any of `id`'s input fields.
std::vector<std::string> producers_of(const Graph& graph, std::string_view id);
/// Components consuming any of `id`'s output fields.
std::vector<std::string> consumers_of(const Graph& graph, std::string_view id);
std::vector<std::string> optimizable_ids(const Graph& graph);

nlohmann::ordered_json graph_to_json(const Graph& graph);
Graph graph_from_json(const nlohmann::json& j);
Graph load_graph(const std::filesystem::path& path);
void save_graph(const Graph& graph, const std::filesystem::path& path);

}  // namespace resgrad
