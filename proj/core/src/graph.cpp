#include "resgrad/graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json_io.hpp"
#include "resgrad/errors.hpp"

namespace resgrad {

const ComponentSpec* Graph::find(std::string_view id) const noexcept {
  for (const auto& c : components)
    if (c.id == id) return &c;
  return nullptr;
}

ComponentSpec* Graph::find(std::string_view id) noexcept {
  for (auto& c : components)
    if (c.id == id) return &c;
  return nullptr;
}

const ComponentSpec& Graph::at(std::string_view id) const {
  if (const auto* c = find(id)) return *c;
  throw UnknownComponent(std::string(id));
}

std::size_t Graph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < components.size(); ++i)
    if (components[i].id == id) return i;
  throw UnknownComponent(std::string(id));
}

std::string_view to_string(Violation::Kind kind) noexcept {
  switch (kind) {
    case Violation::Kind::invalid_id: return "invalid component id";
    case Violation::Kind::duplicate_id: return "duplicate component id";
    case Violation::Kind::invalid_field_name: return "invalid field name";
    case Violation::Kind::empty_fields: return "empty field list";
    case Violation::Kind::duplicate_field: return "duplicate field";
    case Violation::Kind::optimizable_tool: return "optimizable tool";
    case Violation::Kind::empty_prompt: return "empty prompt";
    case Violation::Kind::invalid_decoding: return "invalid decoding";
    case Violation::Kind::unbound_input: return "unbound input field";
    case Violation::Kind::forward_reference: return "forward reference";
    case Violation::Kind::duplicate_output: return "duplicate output field";
  }
  return "unknown";
}

std::vector<std::string> ValidationReport::messages() const {
  std::vector<std::string> out;
  for (const auto& v : violations) {
    std::string m = std::string(to_string(v.kind));
    if (!v.component.empty()) m += " [" + v.component + "]";
    if (!v.field.empty()) m += " '" + v.field + "'";
    if (!v.message.empty()) m += ": " + v.message;
    out.push_back(std::move(m));
  }
  return out;
}

bool is_valid_field_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

namespace {

void check_field_list(const ComponentSpec& c, const std::vector<std::string>& fields, const char* which,
                      std::vector<Violation>& out) {
  using K = Violation::Kind;
  if (fields.empty()) out.push_back({K::empty_fields, c.id, "", std::string(which) + " is empty"});
  std::set<std::string> seen;
  for (const auto& f : fields) {
    if (!is_valid_field_name(f)) out.push_back({K::invalid_field_name, c.id, f, which});
    if (!seen.insert(f).second) out.push_back({K::duplicate_field, c.id, f, which});
  }
}

}  // namespace

ValidationReport validate_graph(const Graph& graph) {
  using K = Violation::Kind;
  ValidationReport report;
  auto& out = report.violations;

  std::set<std::string> task_seen;
  for (const auto& f : graph.task_inputs) {
    if (!is_valid_field_name(f)) out.push_back({K::invalid_field_name, std::string(kTaskInputId), f, "task_inputs"});
    if (!task_seen.insert(f).second) out.push_back({K::duplicate_field, std::string(kTaskInputId), f, "task_inputs"});
  }

  std::set<std::string> ids;
  for (const auto& c : graph.components) {
    if (!is_valid_field_name(c.id) || c.id == kTaskInputId)
      out.push_back({K::invalid_id, c.id, "", "ids use [a-z0-9_]+"});
    if (!ids.insert(c.id).second) out.push_back({K::duplicate_id, c.id, "", ""});
    check_field_list(c, c.input_fields, "input_fields", out);
    check_field_list(c, c.output_fields, "output_fields", out);
    if (c.optimizable && c.is_tool) out.push_back({K::optimizable_tool, c.id, "", "tools have no prompt to optimize"});
    if (c.optimizable && c.prompt_text.empty()) out.push_back({K::empty_prompt, c.id, "", ""});
    if (!(c.decoding.temperature >= 0.0 && c.decoding.temperature <= 2.0))
      out.push_back({K::invalid_decoding, c.id, "temperature", "must lie in [0, 2]"});
    if (c.decoding.max_new_tokens < 1)
      out.push_back({K::invalid_decoding, c.id, "max_new_tokens", "must be positive"});
  }

  // Every (earlier producer, later producer) pair sharing a field name.
  std::vector<std::pair<std::string, const std::vector<std::string>*>> producers;
  producers.emplace_back(std::string(kTaskInputId), &graph.task_inputs);
  for (const auto& c : graph.components) producers.emplace_back(c.id, &c.output_fields);
  for (std::size_t i = 0; i < producers.size(); ++i) {
    for (std::size_t j = i + 1; j < producers.size(); ++j) {
      for (const auto& f : *producers[j].second) {
        const auto& earlier = *producers[i].second;
        if (std::find(earlier.begin(), earlier.end(), f) != earlier.end())
          out.push_back({K::duplicate_output, producers[j].first, f, "also produced by " + producers[i].first});
      }
    }
  }

  std::set<std::string> available(graph.task_inputs.begin(), graph.task_inputs.end());
  for (std::size_t i = 0; i < graph.components.size(); ++i) {
    const auto& c = graph.components[i];
    for (const auto& f : c.input_fields) {
      if (available.count(f)) continue;
      bool later = false;
      for (std::size_t j = i; j < graph.components.size() && !later; ++j) {
        const auto& outs = graph.components[j].output_fields;
        later = std::find(outs.begin(), outs.end(), f) != outs.end();
      }
      if (later)
        out.push_back({K::forward_reference, c.id, f, "produced by a component that runs later"});
      else
        out.push_back({K::unbound_input, c.id, f, "no earlier producer and not a task input"});
    }
    for (const auto& f : c.output_fields) available.insert(f);
  }
  return report;
}

std::vector<std::string> topological_order(const Graph& graph) {
  std::set<std::string> available(graph.task_inputs.begin(), graph.task_inputs.end());
  std::vector<std::string> order;
  for (const auto& c : graph.components) {
    for (const auto& f : c.input_fields) {
      if (!available.count(f))
        throw CycleOrForwardReference("component '" + c.id + "' consumes '" + f +
                                      "' before any component produces it");
    }
    for (const auto& f : c.output_fields) available.insert(f);
    order.push_back(c.id);
  }
  return order;
}

Context project_inputs(const Context& context, const ComponentSpec& component) {
  return restrict_to(context, component.input_fields);
}

std::vector<std::string> producers_of(const Graph& graph, std::string_view id) {
  const auto& target = graph.at(id);
  std::vector<std::string> out;
  for (const auto& c : graph.components) {
    if (c.id == id) break;
    bool feeds = std::any_of(c.output_fields.begin(), c.output_fields.end(), [&](const std::string& f) {
      return std::find(target.input_fields.begin(), target.input_fields.end(), f) != target.input_fields.end();
    });
    if (feeds) out.push_back(c.id);
  }
  return out;
}

std::vector<std::string> consumers_of(const Graph& graph, std::string_view id) {
  const auto& source = graph.at(id);
  std::vector<std::string> out;
  for (const auto& c : graph.components) {
    if (c.id == id) continue;
    bool reads = std::any_of(c.input_fields.begin(), c.input_fields.end(), [&](const std::string& f) {
      return std::find(source.output_fields.begin(), source.output_fields.end(), f) != source.output_fields.end();
    });
    if (reads) out.push_back(c.id);
  }
  return out;
}

std::vector<std::string> optimizable_ids(const Graph& graph) {
  std::vector<std::string> out;
  for (const auto& c : graph.components)
    if (c.optimizable) out.push_back(c.id);
  return out;
}

nlohmann::ordered_json graph_to_json(const Graph& graph) {
  nlohmann::ordered_json j;
  j["task_inputs"] = graph.task_inputs;
  j["components"] = nlohmann::ordered_json::array();
  for (const auto& c : graph.components) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id;
    cj["role_description"] = c.role_description;
    cj["prompt_text"] = c.prompt_text;
    cj["input_fields"] = c.input_fields;
    cj["output_fields"] = c.output_fields;
    cj["optimizable"] = c.optimizable;
    cj["is_tool"] = c.is_tool;
    cj["decoding"] = {{"temperature", c.decoding.temperature}, {"max_new_tokens", c.decoding.max_new_tokens}};
    if (!c.model.empty()) cj["model"] = c.model;
    j["components"].push_back(std::move(cj));
  }
  return j;
}

namespace {

template <class T>
T required(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where, 0, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where, 0, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T optional_value(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return required<T>(j, key, where);
}

}  // namespace

Graph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("graph", 0, "top level must be an object");
  Graph g;
  g.task_inputs = required<std::vector<std::string>>(j, "task_inputs", "graph");
  if (!j.contains("components") || !j["components"].is_array())
    throw ParseError("graph", 0, "'components' must be an array");
  for (std::size_t i = 0; i < j["components"].size(); ++i) {
    const auto& cj = j["components"][i];
    const std::string where = "graph.components[" + std::to_string(i) + "]";
    if (!cj.is_object()) throw ParseError(where, 0, "must be an object");
    ComponentSpec c;
    c.id = required<std::string>(cj, "id", where);
    c.role_description = optional_value<std::string>(cj, "role_description", "", where);
    c.prompt_text = optional_value<std::string>(cj, "prompt_text", "", where);
    c.input_fields = required<std::vector<std::string>>(cj, "input_fields", where);
    c.output_fields = required<std::vector<std::string>>(cj, "output_fields", where);
    c.optimizable = optional_value<bool>(cj, "optimizable", false, where);
    c.is_tool = optional_value<bool>(cj, "is_tool", false, where);
    if (cj.contains("decoding")) {
      const auto& dj = cj["decoding"];
      c.decoding.temperature = optional_value<double>(dj, "temperature", 0.0, where + ".decoding");
      c.decoding.max_new_tokens = optional_value<int>(dj, "max_new_tokens", 1024, where + ".decoding");
    }
    c.model = optional_value<std::string>(cj, "model", "", where);
    g.components.push_back(std::move(c));
  }
  return g;
}

Graph load_graph(const std::filesystem::path& path) {
  return graph_from_json(detail::read_json_file(path));
}

void save_graph(const Graph& graph, const std::filesystem::path& path) {
  detail::write_text_file(path, graph_to_json(graph).dump(2) + "\n");
}

}  // namespace resgrad
