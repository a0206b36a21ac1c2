#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "resgrad/backend.hpp"
#include "resgrad/backward.hpp"
#include "resgrad/dataset.hpp"
#include "resgrad/forward.hpp"
#include "resgrad/graph.hpp"
#include "resgrad/optimizer.hpp"
#include "resgrad/scheduler.hpp"

namespace resgrad {

/// Optimization-loop settings. Defaults are the reference configuration.
struct TrainConfig {
  int steps = 100;
  int batch_size = 8;
  int update_freq = 1;
  int eval_time = 3;
  int test_repeats = 3;
  int max_concurrency = 20;
  std::uint64_t seed = 42;
  Strategy strategy = Strategy::density_boltzmann;
  double tau = 1.0;
  ProjectorSettings projector;
  OptimizerSettings optimizer;

  /// Violations of the positivity constraints, empty when valid.
  std::vector<std::string> violations() const;
};

using NamedInts = std::vector<std::pair<std::string, int>>;

/// What happened in one optimization step.
struct StepRecord {
  int step = 0;
  std::vector<int> batch;
  double train_reward = 0.0;
  int forward_failures = 0;
  int backward_examples = 0;
  int projector_calls = 0;
  int stop_events = 0;
  std::int64_t feedback_tokens = 0;
  /// update | noop_zero_density | skip_empty_buffer | skip_tags_not_found |
  /// skip_optimizer_error | no_update_step
  std::string action;
  std::optional<std::string> selected;
  std::optional<std::string> new_prompt;
  std::optional<double> dev_score;
  /// Densities the scheduler saw, and after the update's reset.
  NamedInts rho;
  NamedInts rho_after;
  NamedInts prompt_versions;
  TokenUsage forward_tokens;
  TokenUsage projector_tokens;
  TokenUsage optimizer_tokens;
};

nlohmann::ordered_json to_json(const StepRecord& r);

/// Best prompts by dev score; step 0 is the initial configuration.
struct Checkpoint {
  int step = 0;
  double dev_score = 0.0;
  std::vector<std::pair<std::string, std::string>> prompts;
};

nlohmann::ordered_json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
/// Installs the checkpoint's prompts. Throws UnknownComponent.
void apply_checkpoint(Graph& graph, const Checkpoint& c);

struct TrainHistory {
  double initial_dev_score = 0.0;
  std::vector<StepRecord> steps;
  Checkpoint best;
  Graph final_graph;
  DensityTable densities;
  FeedbackBuffer buffers;
  std::vector<RoutingRecord> routing;
};

/// Hooks for run logging and checkpointing; called from the control thread.
class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_routing(const std::vector<RoutingRecord>&) {}
  virtual void on_error(int /*step*/, int /*example*/, const std::string& /*what*/) {}
  virtual void on_prompt_change(int /*step*/, const std::string& /*component*/, const std::string& /*prompt*/) {}
  virtual void on_step(const StepRecord&, const Checkpoint& /*best*/) {}
};

struct EvalResult {
  double mean = 0.0;
  std::vector<double> trial_means;
  /// Mean over repeats, per example.
  std::vector<double> per_example;
  std::vector<bool> failed;
};

/// Mean reward over repeats × examples. A failing example scores 0 and is
/// flagged. Examples run on up to `max_concurrency` threads.
EvalResult evaluate(const Graph& graph, const std::vector<Example>& dataset, int repeats, Backend& backend,
                    int max_concurrency, const TruncationPolicy& policy = {}, const ToolRegistry& tools = {});

struct TrainBackends {
  Backend& forward;
  Backend& projector;
  Backend& optimizer;
};

/// The full optimization loop: sample, forward, route feedback backward,
/// update one prompt chosen by the scheduler, evaluate on dev.
TrainHistory run_training(const Graph& graph, const std::vector<Example>& train_set,
                          const std::vector<Example>& dev_set, const TrainConfig& config, TrainBackends backends,
                          const TruncationPolicy& policy = {}, const ToolRegistry& tools = {},
                          TrainObserver* observer = nullptr);

/// Indices of the examples used at `step`; a pure function of (seed, step).
std::vector<int> sample_batch(std::uint64_t seed, int step, int batch_size, int dataset_size);

}  // namespace resgrad
