#include "resgrad/backward.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>

#include "resgrad/prompts.hpp"
#include "resgrad/text.hpp"

namespace resgrad {

std::string_view to_string(FaultClass c) noexcept {
  switch (c) {
    case FaultClass::pure_local: return "pure_local";
    case FaultClass::pure_upstream: return "pure_upstream";
    case FaultClass::mixed: return "mixed";
    case FaultClass::none: return "none";
  }
  return "none";
}

const std::string* RoutedFeedback::upstream_text() const noexcept {
  if (const auto* f = std::get_if<Feedback>(&upstream)) return &f->text;
  return nullptr;
}

FaultClass RoutedFeedback::fault_class() const noexcept {
  if (local) return stops() ? FaultClass::pure_local : FaultClass::mixed;
  return stops() ? FaultClass::none : FaultClass::pure_upstream;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Header { local, upstream };

bool is_decoration(char c) { return c == '*' || c == '_' || c == '`' || c == '#' || c == '>' || c == ' ' || c == '\t'; }

bool iequals_prefix(std::string_view s, std::string_view word) {
  if (s.size() < word.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != word[i]) return false;
  return true;
}

// Recognizes `LOCAL:` / `**Upstream**:` / `## LOCAL: text` style lines and
// returns the text following the colon.
std::optional<std::pair<Header, std::string_view>> match_header(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && is_decoration(line[i])) ++i;
  auto rest = line.substr(i);
  Header kind;
  std::size_t len;
  if (iequals_prefix(rest, "local")) {
    kind = Header::local;
    len = 5;
  } else if (iequals_prefix(rest, "upstream")) {
    kind = Header::upstream;
    len = 8;
  } else {
    return std::nullopt;
  }
  std::size_t j = len;
  while (j < rest.size() && (rest[j] == '*' || rest[j] == '_' || rest[j] == '`' || rest[j] == ' ')) ++j;
  if (j >= rest.size() || rest[j] != ':') return std::nullopt;
  ++j;
  while (j < rest.size() && (rest[j] == '*' || rest[j] == '_' || rest[j] == '`')) ++j;
  return std::make_pair(kind, rest.substr(j));
}

struct Line {
  std::string_view text;
  std::size_t begin;  // byte offset of the line in the completion
};

std::vector<Line> split_lines(std::string_view s) {
  std::vector<Line> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto nl = s.find('\n', pos);
    if (nl == std::string_view::npos) nl = s.size();
    auto line = s.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back({line, pos});
    pos = nl + 1;
  }
  return out;
}

std::optional<std::string> non_empty(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  return std::string(s);
}

}  // namespace

bool is_stop_token(std::string_view section) {
  auto strip = [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isspace(u) || (std::ispunct(u) && c != '_');
  };
  while (!section.empty() && strip(section.front())) section.remove_prefix(1);
  while (!section.empty() && strip(section.back())) section.remove_suffix(1);
  return section.size() == kStopGradientToken.size() && to_lower(section) == "stop_gradient";
}

RoutedFeedback parse_routed(std::string_view completion) {
  const auto lines = split_lines(completion);
  std::optional<std::size_t> local_line;
  std::optional<std::size_t> upstream_line;
  std::string_view local_head;
  std::string_view upstream_head;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto h = match_header(lines[i].text);
    if (!h) continue;
    if (h->first == Header::local && !local_line) {
      local_line = i;
      local_head = h->second;
    } else if (h->first == Header::upstream && !upstream_line) {
      upstream_line = i;
      upstream_head = h->second;
    }
  }

  RoutedFeedback out;
  if (!local_line || !upstream_line) {
    out.local = non_empty(completion);
    out.upstream = Stop{};
    return out;
  }

  // A section runs from its header to the other header when that one comes
  // later, otherwise to the end of the completion.
  auto section = [&](std::size_t header, std::string_view head, std::size_t other) {
    std::string text(head);
    const std::size_t end = other > header ? other : lines.size();
    for (std::size_t i = header + 1; i < end; ++i) {
      text += '\n';
      text += lines[i].text;
    }
    return text;
  };

  out.local = non_empty(section(*local_line, local_head, *upstream_line));
  const auto upstream = section(*upstream_line, upstream_head, *local_line);
  if (auto text = non_empty(upstream); text && !is_stop_token(*text))
    out.upstream = Feedback{std::move(*text)};
  else
    out.upstream = Stop{};
  return out;
}

// ---------------------------------------------------------------------------
// Prompt construction

ChatRequest build_backward_prompt(const ComponentSpec& component, const TrajectoryEntry& entry,
                                  const ObjectiveFeedback& incoming, const std::vector<std::string>& consumers,
                                  const ProjectorSettings& settings) {
  std::string response_desc = "input to downstream components";
  if (!consumers.empty()) {
    response_desc = "input to ";
    for (std::size_t i = 0; i < consumers.size(); ++i) {
      if (i) response_desc += ", ";
      response_desc += consumers[i];
    }
  }

  ChatRequest r;
  r.system = std::string(kBackwardSystemPrompt) + "\n\n" + std::string(kBackwardRoutingFormat);
  r.user = format_template(kBackwardContextTemplate,
                           {
                               {"variable_desc", component.role_description},
                               {"system_prompt", component.prompt_text},
                               {"lm_input", render_fields(entry.input_slice)},
                               {"lm_output", render_fields(entry.output)},
                               {"response_desc", response_desc},
                               {"objective_feedback", incoming.text},
                               {"variable_short", utf8_prefix(component.prompt_text, kVariableShortChars)},
                           });
  r.temperature = settings.temperature;
  r.max_new_tokens = settings.max_new_tokens;
  r.model = settings.model;
  return r;
}

// ---------------------------------------------------------------------------
// Density and buffers

DensityTable::DensityTable(const std::vector<std::string>& component_ids) {
  for (const auto& id : component_ids) slots_.push_back({id, 0, 0});
}

bool DensityTable::contains(std::string_view id) const noexcept {
  return std::any_of(slots_.begin(), slots_.end(), [&](const Slot& s) { return s.id == id; });
}

DensityTable::Slot& DensityTable::slot(std::string_view id) {
  for (auto& s : slots_)
    if (s.id == id) return s;
  throw UnknownComponent(std::string(id));
}

const DensityTable::Slot& DensityTable::slot(std::string_view id) const {
  for (const auto& s : slots_)
    if (s.id == id) return s;
  throw UnknownComponent(std::string(id));
}

int DensityTable::rho(std::string_view id) const { return slot(id).rho; }
int DensityTable::t_last(std::string_view id) const { return slot(id).t_last; }
void DensityTable::increment(std::string_view id) { ++slot(id).rho; }

void DensityTable::reset(std::string_view id, int step) {
  auto& s = slot(id);
  s.rho = 0;
  s.t_last = step;
}

std::vector<std::string> DensityTable::ids() const {
  std::vector<std::string> out;
  for (const auto& s : slots_) out.push_back(s.id);
  return out;
}

void record_density(DensityTable& densities, std::string_view component_id, const RoutedFeedback& routed, int) {
  if (!densities.contains(component_id)) throw UnknownComponent(std::string(component_id));
  if (routed.local) densities.increment(component_id);
}

void FeedbackBuffer::append(std::string_view id, FeedbackItem item) {
  for (auto& [k, v] : buffers_) {
    if (k == id) {
      v.push_back(std::move(item));
      return;
    }
  }
  buffers_.emplace_back(std::string(id), std::vector<FeedbackItem>{std::move(item)});
}

const std::vector<FeedbackItem>& FeedbackBuffer::entries(std::string_view id) const {
  static const std::vector<FeedbackItem> empty;
  for (const auto& [k, v] : buffers_)
    if (k == id) return v;
  return empty;
}

void FeedbackBuffer::clear(std::string_view id) {
  for (auto& [k, v] : buffers_)
    if (k == id) v.clear();
}

// ---------------------------------------------------------------------------
// Routing

const NodeRouting* BackwardReport::find(std::string_view component_id) const noexcept {
  for (const auto& n : nodes)
    if (n.component_id == component_id) return &n;
  return nullptr;
}

BackwardReport route_feedback(const Graph& graph, const Trajectory& trajectory, const ObjectiveFeedback& objective,
                              Backend& projector, const ProjectorSettings& settings) {
  BackwardReport report;
  if (graph.components.empty()) return report;

  std::map<std::string, std::vector<ObjectiveFeedback>> pending;
  pending[graph.components.back().id].push_back(objective);

  for (auto it = graph.components.rbegin(); it != graph.components.rend(); ++it) {
    const auto& component = *it;
    auto p = pending.find(component.id);
    if (p == pending.end() || p->second.empty()) continue;

    NodeRouting node;
    node.component_id = component.id;
    node.incoming = p->second.front();
    for (std::size_t i = 1; i < p->second.size(); ++i) {
      node.incoming.text += "\n\n" + p->second[i].text;
      node.incoming.source += "," + p->second[i].source;
    }

    const auto* entry = trajectory.find(component.id);
    if (!entry) throw NodeNotFound(component.id);
    node.context_snippet = utf8_prefix(render_fields(entry->input_slice), kContextSnippetChars);

    std::optional<std::string> upstream_text;
    if (component.is_tool) {
      node.action = NodeRouting::Action::pass_through;
      upstream_text = node.incoming.text;
    } else {
      const auto request = build_backward_prompt(component, *entry, node.incoming,
                                                 consumers_of(graph, component.id), settings);
      ChatResponse response;
      try {
        ++report.projector_calls;
        response = projector.complete(request);
      } catch (const BackendError& e) {
        report.error = e.what();
        return report;
      }
      node.usage = response.usage;
      report.feedback_tokens += response.usage.completion_tokens;
      node.routed = parse_routed(response.text);
      if (node.routed->stops())
        ++report.stop_events;
      else
        upstream_text = *node.routed->upstream_text();
    }

    if (upstream_text) {
      const auto parents = producers_of(graph, component.id);
      if (parents.empty()) report.reached_input_from.push_back(component.id);
      if (parents.size() > 1) report.fan_in = true;
      for (const auto& parent : parents) {
        pending[parent].push_back({*upstream_text, component.id});
        node.routed_to.push_back(parent);
      }
    }
    report.nodes.push_back(std::move(node));
  }
  return report;
}

void apply_routing(const Graph& graph, const BackwardReport& report, DensityTable& densities,
                   FeedbackBuffer& buffers, int step) {
  for (const auto& node : report.nodes) {
    if (!node.routed || !node.routed->local) continue;
    const auto& component = graph.at(node.component_id);
    if (!component.optimizable) continue;
    record_density(densities, node.component_id, *node.routed, step);
    buffers.append(node.component_id, {step, *node.routed->local, node.context_snippet});
  }
}

BackwardReport backward_pass(const Graph& graph, const Trajectory& trajectory, const ObjectiveFeedback& objective,
                             Backend& projector, DensityTable& densities, FeedbackBuffer& buffers, int step,
                             const ProjectorSettings& settings) {
  auto report = route_feedback(graph, trajectory, objective, projector, settings);
  apply_routing(graph, report, densities, buffers, step);
  if (report.error) throw BackendError(false, *report.error);
  return report;
}

std::vector<RoutingRecord> routing_records(const BackwardReport& report, int step, int example) {
  std::vector<RoutingRecord> out;
  for (const auto& node : report.nodes) {
    if (!node.routed) continue;
    out.push_back({step, example, node.component_id, node.routed->local.has_value(), !node.routed->stops(),
                   node.usage.completion_tokens});
  }
  return out;
}

std::string critique(std::string_view answer, double reward, std::string_view gold, Metric metric) {
  char score[32];
  std::snprintf(score, sizeof score, "%.3f", reward);
  return "The final answer " + std::string(answer) + " scored " + score + " against gold " + std::string(gold) +
         " under metric " + std::string(to_string(metric)) + ".";
}

}  // namespace resgrad
