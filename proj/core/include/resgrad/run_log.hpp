#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resgrad/graph.hpp"
#include "resgrad/training.hpp"

namespace resgrad {

struct LogEvent {
  std::uint64_t seq = 0;
  std::string time;
  /// step | routing | prompt_change | error | run_start | run_end
  std::string type;
  nlohmann::ordered_json data;
};

/// Append-only JSON-lines event log. Thread-safe; all writers share one
/// serialized sink and every line is flushed as written.
class RunLog {
 public:
  /// Appends to an existing log, continuing its sequence numbers.
  explicit RunLog(const std::filesystem::path& path);

  std::uint64_t append(const std::string& type, nlohmann::ordered_json data);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
  std::uint64_t next_seq_ = 1;
};

/// Reads a log. A torn final line (crash mid-write) is dropped; corruption
/// anywhere else throws ParseError.
std::vector<LogEvent> read_run_log(const std::filesystem::path& path);

/// Highest step with a `step` event, or 0.
int last_completed_step(const std::vector<LogEvent>& events);

/// Applies prompt_change events with step <= up_to_step (all of them when
/// unset) to `initial`.
Graph replay_prompts(const Graph& initial, const std::vector<LogEvent>& events,
                     std::optional<int> up_to_step = std::nullopt);

/// Training observer that mirrors events into a RunLog and rewrites the
/// best-prompts checkpoint after every accepted update.
class RunLogObserver final : public TrainObserver {
 public:
  RunLogObserver(RunLog& log, std::filesystem::path checkpoint_path);

  void on_routing(const std::vector<RoutingRecord>& records) override;
  void on_error(int step, int example, const std::string& what) override;
  void on_prompt_change(int step, const std::string& component, const std::string& prompt) override;
  void on_step(const StepRecord& record, const Checkpoint& best) override;

 private:
  RunLog& log_;
  std::filesystem::path checkpoint_path_;
};

nlohmann::ordered_json to_json(const RoutingRecord& r);

}  // namespace resgrad
