#include "resgrad/training.hpp"

#include <numeric>
#include <random>

#include "json_io.hpp"
#include "parallel.hpp"

namespace resgrad {

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> out;
  auto positive = [&](const char* name, long long v) {
    if (v <= 0) out.push_back(std::string("train.") + name + ": must be positive");
  };
  positive("steps", steps);
  positive("batch_size", batch_size);
  positive("update_freq", update_freq);
  positive("eval_time", eval_time);
  positive("test_repeats", test_repeats);
  positive("max_concurrency", max_concurrency);
  if (!(tau > 0.0)) out.push_back("scheduler.tau: must be positive");
  if (!(projector.temperature >= 0.0 && projector.temperature <= 2.0))
    out.push_back("backends.projector.temperature: must lie in [0, 2]");
  if (!(optimizer.temperature >= 0.0 && optimizer.temperature <= 2.0))
    out.push_back("backends.optimizer.temperature: must lie in [0, 2]");
  if (projector.max_new_tokens < 1) out.push_back("backends.projector.max_new_tokens: must be positive");
  if (optimizer.max_new_tokens < 1) out.push_back("backends.optimizer.max_new_tokens: must be positive");
  return out;
}

namespace {

nlohmann::ordered_json named_ints(const NamedInts& v) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, n] : v) j[k] = n;
  return j;
}

nlohmann::ordered_json usage_json(const TokenUsage& u) {
  return {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

NamedInts snapshot_rho(const DensityTable& d) {
  NamedInts out;
  for (const auto& id : d.ids()) out.emplace_back(id, d.rho(id));
  return out;
}

}  // namespace

nlohmann::ordered_json to_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["batch"] = r.batch;
  j["train_reward"] = r.train_reward;
  j["forward_failures"] = r.forward_failures;
  j["backward_examples"] = r.backward_examples;
  j["projector_calls"] = r.projector_calls;
  j["stop_events"] = r.stop_events;
  j["feedback_tokens"] = r.feedback_tokens;
  j["action"] = r.action;
  j["selected"] = r.selected ? nlohmann::ordered_json(*r.selected) : nlohmann::ordered_json();
  j["new_prompt"] = r.new_prompt ? nlohmann::ordered_json(*r.new_prompt) : nlohmann::ordered_json();
  j["dev_score"] = r.dev_score ? nlohmann::ordered_json(*r.dev_score) : nlohmann::ordered_json();
  j["rho"] = named_ints(r.rho);
  j["rho_after"] = named_ints(r.rho_after);
  j["prompt_versions"] = named_ints(r.prompt_versions);
  j["tokens"] = {{"forward", usage_json(r.forward_tokens)},
                 {"projector", usage_json(r.projector_tokens)},
                 {"optimizer", usage_json(r.optimizer_tokens)}};
  return j;
}

nlohmann::ordered_json to_json(const Checkpoint& c) {
  nlohmann::ordered_json j;
  j["step"] = c.step;
  j["dev_score"] = c.dev_score;
  j["prompts"] = nlohmann::ordered_json::object();
  for (const auto& [id, p] : c.prompts) j["prompts"][id] = p;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    c.step = j.value("step", 0);
    c.dev_score = j.at("dev_score").get<double>();
    for (const auto& [id, p] : j.at("prompts").items()) c.prompts.emplace_back(id, p.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint", 0, e.what());
  }
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(detail::read_json_file(path));
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  detail::write_text_file(path, to_json(c).dump(2) + "\n");
}

void apply_checkpoint(Graph& graph, const Checkpoint& c) {
  for (const auto& [id, prompt] : c.prompts) {
    auto* component = graph.find(id);
    if (!component) throw UnknownComponent(id);
    component->prompt_text = prompt;
  }
}

EvalResult evaluate(const Graph& graph, const std::vector<Example>& dataset, int repeats, Backend& backend,
                    int max_concurrency, const TruncationPolicy& policy, const ToolRegistry& tools) {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  EvalResult result;
  const std::size_t n = dataset.size();
  result.per_example.assign(n, 0.0);
  result.failed.assign(n, false);
  if (n == 0) return result;

  std::vector<double> scores(n * static_cast<std::size_t>(repeats), 0.0);
  std::vector<char> failed(scores.size(), 0);
  detail::parallel_for(scores.size(), max_concurrency, [&](std::size_t job) {
    const auto& ex = dataset[job % n];
    try {
      if (!ex.gold) throw Error("example has no gold answer");
      scores[job] = *run_forward(graph, ex.input, backend, policy, ex.gold, tools).reward;
    } catch (const Error&) {
      scores[job] = 0.0;
      failed[job] = 1;
    }
  });

  double total = 0.0;
  for (int r = 0; r < repeats; ++r) {
    double trial = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto job = static_cast<std::size_t>(r) * n + i;
      trial += scores[job];
      result.per_example[i] += scores[job] / repeats;
      if (failed[job]) result.failed[i] = true;
    }
    result.trial_means.push_back(trial / static_cast<double>(n));
    total += trial;
  }
  result.mean = total / static_cast<double>(scores.size());
  return result;
}

std::vector<int> sample_batch(std::uint64_t seed, int step, int batch_size, int dataset_size) {
  if (dataset_size <= 0 || batch_size <= 0) return {};
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::vector<int> out;
  if (batch_size <= dataset_size) {
    std::vector<int> idx(static_cast<std::size_t>(dataset_size));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < batch_size; ++i) {
      const auto j = static_cast<std::size_t>(i) + uniform_index(rng, static_cast<std::size_t>(dataset_size - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
      out.push_back(idx[static_cast<std::size_t>(i)]);
    }
  } else {
    for (int i = 0; i < batch_size; ++i)
      out.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(dataset_size))));
  }
  return out;
}

namespace {

struct ExampleOutcome {
  double reward = 0.0;
  bool forward_failed = false;
  std::string error;
  TokenUsage forward_tokens;
  std::optional<BackwardReport> report;
};

std::vector<std::pair<std::string, std::string>> prompts_of(const Graph& g) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : g.components)
    if (c.optimizable) out.emplace_back(c.id, c.prompt_text);
  return out;
}

}  // namespace

TrainHistory run_training(const Graph& initial_graph, const std::vector<Example>& train_set,
                          const std::vector<Example>& dev_set, const TrainConfig& config, TrainBackends backends,
                          const TruncationPolicy& policy, const ToolRegistry& tools, TrainObserver* observer) {
  if (auto v = config.violations(); !v.empty()) throw ValidationError(v);
  if (auto report = validate_graph(initial_graph); !report.ok()) throw ValidationError(report.messages());
  if (train_set.empty() || dev_set.empty()) throw ValidationError({"train and dev sets must be non-empty"});
  for (const auto* set : {&train_set, &dev_set})
    for (const auto& ex : *set)
      if (!ex.gold) throw ValidationError({"every training and dev example needs a gold answer"});

  TrainHistory history;
  Graph graph = initial_graph;
  std::vector<std::string> ids;
  for (const auto& c : graph.components) ids.push_back(c.id);
  DensityTable densities(ids);
  FeedbackBuffer buffers;
  const auto candidates = optimizable_ids(graph);
  SchedulerState scheduler(config.strategy, config.tau, config.seed);
  std::map<std::string, int> versions;
  for (const auto& id : candidates) versions[id] = 0;

  history.initial_dev_score =
      evaluate(graph, dev_set, config.eval_time, backends.forward, config.max_concurrency, policy, tools).mean;
  history.best = {0, history.initial_dev_score, prompts_of(graph)};

  for (int t = 1; t <= config.steps; ++t) {
    StepRecord record;
    record.step = t;
    record.batch = sample_batch(config.seed, t, config.batch_size, static_cast<int>(train_set.size()));

    std::vector<ExampleOutcome> outcomes(record.batch.size());
    detail::parallel_for(outcomes.size(), config.max_concurrency, [&](std::size_t i) {
      const auto& ex = train_set[static_cast<std::size_t>(record.batch[i])];
      auto& out = outcomes[i];
      ForwardResult fwd;
      try {
        fwd = run_forward(graph, ex.input, backends.forward, policy, ex.gold, tools);
      } catch (const ForwardError& e) {
        out.forward_failed = true;
        out.error = e.what();
        return;
      } catch (const Error& e) {
        out.forward_failed = true;
        out.error = e.what();
        return;
      }
      out.reward = *fwd.reward;
      out.forward_tokens = fwd.total_tokens;
      if (out.reward >= 1.0) return;
      const ObjectiveFeedback objective{
          critique(fwd.final_context.at(ex.gold->field), out.reward, ex.gold->value, ex.gold->metric)};
      out.report = route_feedback(graph, fwd.trajectory, objective, backends.projector, config.projector);
    });

    // Single-writer fold, in batch order.
    double reward_sum = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      auto& out = outcomes[i];
      reward_sum += out.reward;
      record.forward_tokens += out.forward_tokens;
      if (out.forward_failed) {
        ++record.forward_failures;
        if (observer) observer->on_error(t, static_cast<int>(i), out.error);
        continue;
      }
      if (!out.report) continue;
      ++record.backward_examples;
      apply_routing(graph, *out.report, densities, buffers, t);
      record.projector_calls += out.report->projector_calls;
      record.stop_events += out.report->stop_events;
      record.feedback_tokens += out.report->feedback_tokens;
      for (const auto& node : out.report->nodes) record.projector_tokens += node.usage;
      auto records = routing_records(*out.report, t, static_cast<int>(i));
      if (observer) observer->on_routing(records);
      history.routing.insert(history.routing.end(), records.begin(), records.end());
      if (out.report->error && observer) observer->on_error(t, static_cast<int>(i), *out.report->error);
    }
    record.train_reward = outcomes.empty() ? 0.0 : reward_sum / static_cast<double>(outcomes.size());
    record.rho = snapshot_rho(densities);

    if (t % config.update_freq != 0) {
      record.action = "no_update_step";
    } else {
      const bool any_density = std::any_of(candidates.begin(), candidates.end(),
                                           [&](const std::string& id) { return densities.rho(id) > 0; });
      if (!any_density) {
        record.action = "noop_zero_density";
      } else {
        const auto k = select_component(scheduler, densities, candidates);
        record.selected = k;
        const auto& items = buffers.entries(k);
        if (items.empty()) {
          record.action = "skip_empty_buffer";
        } else {
          auto* component = graph.find(k);
          const auto request = build_update_prompt(*component, items, config.optimizer);
          try {
            const auto response = backends.optimizer.complete(request);
            record.optimizer_tokens += response.usage;
            auto prompt = extract_new_prompt(response.text);
            if (prompt.empty()) throw TagsNotFound(std::string(kImprovedPromptStartTag), std::string(kImprovedPromptEndTag));
            component->prompt_text = prompt;
            densities.reset(k, t);
            buffers.clear(k);
            ++versions[k];
            record.action = "update";
            record.new_prompt = std::move(prompt);
            if (observer) observer->on_prompt_change(t, k, component->prompt_text);
          } catch (const TagsNotFound&) {
            record.action = "skip_tags_not_found";
          } catch (const BackendError& e) {
            record.action = "skip_optimizer_error";
            if (observer) observer->on_error(t, -1, e.what());
          }
        }
      }
      record.dev_score =
          evaluate(graph, dev_set, config.eval_time, backends.forward, config.max_concurrency, policy, tools).mean;
      if (*record.dev_score > history.best.dev_score) history.best = {t, *record.dev_score, prompts_of(graph)};
    }
    record.rho_after = snapshot_rho(densities);
    for (const auto& id : candidates) record.prompt_versions.emplace_back(id, versions[id]);
    if (observer) observer->on_step(record, history.best);
    history.steps.push_back(std::move(record));
  }

  history.final_graph = std::move(graph);
  history.densities = std::move(densities);
  history.buffers = std::move(buffers);
  return history;
}

}  // namespace resgrad
