#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "resgrad/config.hpp"
#include "resgrad/dataset.hpp"
#include "resgrad/errors.hpp"
#include "resgrad/graph.hpp"
#include "resgrad/metrics.hpp"
#include "resgrad/noise_sim.hpp"
#include "resgrad/run_log.hpp"
#include "resgrad/training.hpp"

namespace resgrad::cli {

namespace {

struct Outcome {
  int code = kExitOk;
  std::string status = "ok";
};

Outcome validation_failed() { return {kExitValidation, "validation_failed"}; }

void print_violations(std::ostream& err, const std::vector<std::string>& v) {
  for (const auto& line : v) err << "violation: " << line << "\n";
}

Graph load_valid_graph(const RunConfig& config) {
  auto graph = load_graph(config.resolve(config.graph));
  auto report = validate_graph(graph);
  if (!report.ok()) {
    auto messages = report.messages();
    for (auto& m : messages) m = "graph: " + m;
    throw ValidationError(std::move(messages));
  }
  return graph;
}

Outcome cmd_validate(const std::string& config_path, std::ostream& out) {
  const auto config = load_config(config_path);
  const auto graph = load_valid_graph(config);
  std::vector<std::string> problems;
  if (optimizable_ids(graph).empty()) problems.push_back("graph: no optimizable components");
  for (const auto& [name, path] : {std::pair{"datasets.train", config.train_data}, std::pair{"datasets.dev", config.dev_data}}) {
    const auto data = load_dataset(config.resolve(path));
    if (data.empty()) problems.push_back(std::string(name) + ": dataset is empty");
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!data[i].gold) problems.push_back(std::string(name) + ": example " + std::to_string(i + 1) + " has no gold");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  out << "config ok: " << graph.components.size() << " components, " << optimizable_ids(graph).size()
      << " optimizable\n";
  return {};
}

Outcome cmd_run(const std::string& config_path, const std::string& output_override, std::ostream& out) {
  auto config = load_config(config_path);
  const auto graph = load_valid_graph(config);
  const auto train = load_dataset(config.resolve(config.train_data));
  const auto dev = load_dataset(config.resolve(config.dev_data));
  const std::filesystem::path out_dir =
      output_override.empty() ? config.resolve(config.output_dir) : std::filesystem::path(output_override);

  auto forward = make_backend(config.forward, config);
  auto projector = make_backend(config.projector, config);
  auto optimizer = make_backend(config.optimizer, config);

  std::filesystem::create_directories(out_dir);
  RunLog log(out_dir / "run_log.jsonl");
  RunLogObserver observer(log, out_dir / kBestPromptsFile);
  nlohmann::ordered_json start;
  start["config"] = config_to_json(config);
  log.append("run_start", std::move(start));

  const auto history =
      run_training(graph, train, dev, config.train, {*forward, *projector, *optimizer}, config.truncation, {}, &observer);
  export_metrics(history, out_dir);
  save_graph(history.final_graph, out_dir / "final_graph.json");

  nlohmann::ordered_json end;
  end["initial_dev_score"] = history.initial_dev_score;
  end["best_step"] = history.best.step;
  end["best_dev_score"] = history.best.dev_score;
  log.append("run_end", end);
  out << end.dump() << "\n";
  return {};
}

Outcome cmd_evaluate(const std::string& config_path, const std::string& prompts, const std::string& split,
                     std::optional<int> repeats, std::ostream& out) {
  const auto config = load_config(config_path);
  auto graph = load_valid_graph(config);
  if (!prompts.empty()) apply_checkpoint(graph, load_checkpoint(prompts));
  std::filesystem::path data_path;
  if (split == "train")
    data_path = config.train_data;
  else if (split == "dev")
    data_path = config.dev_data;
  else
    data_path = config.test_data;
  if (data_path.empty()) throw ValidationError({"datasets." + split + ": not configured"});
  const auto data = load_dataset(config.resolve(data_path));
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!data[i].gold)
      throw ValidationError({"datasets." + split + ": example " + std::to_string(i + 1) + " has no gold"});

  auto forward = make_backend(config.forward, config);
  const int n = repeats.value_or(config.train.test_repeats);
  const auto result = evaluate(graph, data, n, *forward, config.train.max_concurrency, config.truncation);
  nlohmann::ordered_json j;
  j["split"] = split;
  j["examples"] = data.size();
  j["repeats"] = n;
  j["mean"] = result.mean;
  j["trial_means"] = result.trial_means;
  j["failures"] = std::count(result.failed.begin(), result.failed.end(), true);
  out << j.dump() << "\n";
  return {};
}

Outcome cmd_simulate(const NoiseModelParams& params, int workers, const std::string& out_path, std::ostream& out) {
  const auto result = simulate_noise_chain(params, workers);
  const auto csv = sim_result_csv(result);
  if (out_path.empty() || out_path == "-") {
    out << csv;
  } else {
    std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot write " + out_path);
    file << csv;
    if (!file) throw Error("write failed for " + out_path);
  }
  return {};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prompt optimization for LLM pipelines with routed textual feedback", "resgrad"};
  app.require_subcommand(1);

  std::string config_path, output_dir, prompts, split = "test", sim_out, distribution = "normal";
  std::optional<int> repeats;
  NoiseModelParams sim;
  int workers = 1;

  auto* run = app.add_subcommand("run", "Run the optimization loop");
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--output-dir", output_dir, "Override the configured output directory");

  auto* eval = app.add_subcommand("evaluate", "Score a prompt checkpoint on a dataset split");
  eval->add_option("--config", config_path, "Run configuration (JSON)")->required();
  eval->add_option("--prompts", prompts, "Checkpoint such as best_prompts.json");
  eval->add_option("--split", split, "train, dev or test")->check(CLI::IsMember({"train", "dev", "test"}));
  eval->add_option("--repeats", repeats, "Repeated trials per example")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo noise propagation along a feedback chain");
  simulate->add_option("--sigma2", sim.sigma2, "Per-hop noise variance")->check(CLI::PositiveNumber);
  simulate->add_option("--p", sim.p, "Per-hop filtering probability")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--depth", sim.depth, "Chain depth")->check(CLI::PositiveNumber);
  simulate->add_option("--trials", sim.trials, "Monte Carlo trials")->check(CLI::Range(std::int64_t{2}, INT64_MAX));
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--distribution", distribution, "normal or rademacher")
      ->check(CLI::IsMember({"normal", "rademacher"}));
  simulate->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_out, "Output CSV path (stdout when omitted)");

  auto* validate = app.add_subcommand("validate", "Check a configuration and its graph");
  validate->add_option("--config", config_path, "Run configuration (JSON)")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("resgrad");

  Outcome outcome;
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    err << "RESULT: ok\n";
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    err << "RESULT: ok\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << "RESULT: usage_error\n";
    return kExitValidation;
  }

  try {
    if (*run) {
      outcome = cmd_run(config_path, output_dir, out);
    } else if (*eval) {
      outcome = cmd_evaluate(config_path, prompts, split, repeats, out);
    } else if (*simulate) {
      sim.distribution = noise_distribution_from_string(distribution);
      outcome = cmd_simulate(sim, workers, sim_out, out);
    } else if (*validate) {
      outcome = cmd_validate(config_path, out);
    }
  } catch (const ValidationError& e) {
    print_violations(err, e.violations());
    outcome = validation_failed();
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    outcome = validation_failed();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    outcome = {kExitRuntime, "error"};
  }
  err << "RESULT: " << outcome.status << "\n";
  return outcome.code;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace resgrad::cli
