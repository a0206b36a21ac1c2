#include "resgrad/forward.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "resgrad/errors.hpp"
#include "resgrad/text.hpp"

namespace resgrad {

const TrajectoryEntry* Trajectory::find(std::string_view component_id) const noexcept {
  for (const auto& e : entries)
    if (e.component_id == component_id) return &e;
  return nullptr;
}

TrajectoryEntry* Trajectory::find(std::string_view component_id) noexcept {
  for (auto& e : entries)
    if (e.component_id == component_id) return &e;
  return nullptr;
}

std::string TruncationPolicy::apply(std::string_view field, std::string_view value) const {
  auto it = caps.find(std::string(field));
  if (it == caps.end()) return std::string(value);
  return utf8_prefix(value, it->second);
}

Context TruncationPolicy::apply(const Context& delta) const {
  Context out;
  for (const auto& [k, v] : delta) out.set(k, apply(k, v));
  return out;
}

std::string_view to_string(Metric m) noexcept {
  return m == Metric::f1 ? "f1" : "exact_match";
}

Metric metric_from_string(std::string_view s) {
  if (s == "exact_match") return Metric::exact_match;
  if (s == "f1") return Metric::f1;
  throw Error("unknown metric: " + std::string(s));
}

void ToolRegistry::add(std::string component_id, ToolFn fn) {
  tools_[std::move(component_id)] = std::move(fn);
}

const ToolFn& ToolRegistry::resolve(const ComponentSpec& component) const {
  static const ToolFn identity = identity_tool;
  if (auto it = tools_.find(component.id); it != tools_.end()) return it->second;
  if (component.id.rfind("identity", 0) == 0) return identity;
  throw UnknownTool(component.id);
}

Context identity_tool(const ComponentSpec& component, const Context& inputs) {
  if (component.input_fields.size() != component.output_fields.size())
    throw OutputArityMismatch("identity node '" + component.id + "' needs as many outputs as inputs");
  Context out;
  for (std::size_t i = 0; i < component.input_fields.size(); ++i)
    out.set(component.output_fields[i], inputs.at(component.input_fields[i]));
  return out;
}

ChatRequest assemble_prompt(const ComponentSpec& component, const Context& inputs) {
  ChatRequest r;
  r.system = component.prompt_text;
  r.user = render_fields(restrict_to(inputs, component.input_fields));
  r.temperature = component.decoding.temperature;
  r.max_new_tokens = component.decoding.max_new_tokens;
  r.model = component.model;
  return r;
}

std::string postprocess_completion(std::string_view completion) {
  auto s = trim(completion);
  if (s.rfind("```", 0) == 0) {
    const auto nl = s.find('\n');
    s = nl == std::string_view::npos ? s.substr(3) : s.substr(nl + 1);
    s = trim(s);
    if (s.size() >= 3 && s.substr(s.size() - 3) == "```") s.remove_suffix(3);
    s = trim(s);
  }
  return std::string(s);
}

Context split_outputs(std::string_view completion, const std::vector<std::string>& output_fields) {
  std::map<std::string, std::string> found;
  std::string current;
  std::string buffer;
  auto flush = [&] {
    if (!current.empty()) found[current] = std::string(trim(buffer));
    buffer.clear();
  };

  std::size_t pos = 0;
  while (pos <= completion.size()) {
    auto nl = completion.find('\n', pos);
    if (nl == std::string_view::npos) nl = completion.size();
    const auto line = completion.substr(pos, nl - pos);
    bool header = false;
    for (const auto& f : output_fields) {
      if (line.size() > f.size() && line.substr(0, f.size()) == f && line[f.size()] == ':') {
        flush();
        if (found.count(f)) throw OutputArityMismatch("field '" + f + "' appears more than once");
        current = f;
        buffer = std::string(line.substr(f.size() + 1));
        header = true;
        break;
      }
    }
    if (!header && !current.empty()) {
      buffer += '\n';
      buffer += line;
    }
    pos = nl + 1;
  }
  flush();

  Context out;
  for (const auto& f : output_fields) {
    auto it = found.find(f);
    if (it == found.end()) throw OutputArityMismatch("completion lacks a '" + f + ":' line");
    out.set(f, it->second);
  }
  return out;
}

ComponentRun run_component(const ComponentSpec& component, const Context& inputs, Backend& backend,
                           const TruncationPolicy& policy, const ToolRegistry& tools) {
  ComponentRun run;
  run.entry.component_id = component.id;
  run.entry.input_slice = inputs;

  Context raw;
  if (component.is_tool) {
    raw = tools.resolve(component)(component, inputs);
    for (const auto& f : component.output_fields)
      if (!raw.contains(f)) throw OutputArityMismatch("tool '" + component.id + "' did not produce '" + f + "'");
    raw = restrict_to(raw, component.output_fields);
  } else {
    auto request = assemble_prompt(component, inputs);
    auto response = backend.complete(request);
    run.entry.usage = response.usage;
    run.entry.request = std::move(request);
    auto text = postprocess_completion(response.text);
    if (component.output_fields.size() == 1)
      raw.set(component.output_fields.front(), std::move(text));
    else
      raw = split_outputs(text, component.output_fields);
  }
  run.delta = policy.apply(raw);
  run.entry.output = run.delta;
  return run;
}

ForwardResult run_forward(const Graph& graph, const Context& task_input, Backend& backend,
                          const TruncationPolicy& policy, const std::optional<GoldSpec>& gold,
                          const ToolRegistry& tools) {
  ForwardResult result;
  result.trajectory.task_input = task_input;
  Context state = task_input;
  for (const auto& component : graph.components) {
    try {
      auto inputs = project_inputs(state, component);
      auto run = run_component(component, inputs, backend, policy, tools);
      state = merge_outputs(state, run.delta);
      result.total_tokens += run.entry.usage;
      result.trajectory.entries.push_back(std::move(run.entry));
    } catch (const BackendError& e) {
      result.trajectory.final_state = state;
      throw ForwardError(component.id, e.what(), e.retryable(), std::move(result.trajectory));
    } catch (const Error& e) {
      result.trajectory.final_state = state;
      throw ForwardError(component.id, e.what(), false, std::move(result.trajectory));
    }
  }
  result.trajectory.final_state = state;
  result.final_context = std::move(state);
  if (gold) result.reward = compute_reward(result.final_context, *gold);
  return result;
}

std::string normalize_answer(std::string_view s) {
  std::istringstream in{to_lower(s)};
  std::string word;
  std::string out;
  while (in >> word) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

double exact_match(std::string_view prediction, std::string_view gold) {
  return normalize_answer(prediction) == normalize_answer(gold) ? 1.0 : 0.0;
}

double token_f1(std::string_view prediction, std::string_view gold) {
  auto tokens = [](std::string_view s) {
    std::istringstream in{normalize_answer(s)};
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  };
  const auto pred = tokens(prediction);
  const auto ref = tokens(gold);
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : ref) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

double compute_reward(const Context& final_context, const GoldSpec& gold) {
  const auto& prediction = final_context.at(gold.field);
  return gold.metric == Metric::f1 ? token_f1(prediction, gold.value) : exact_match(prediction, gold.value);
}

}  // namespace resgrad
