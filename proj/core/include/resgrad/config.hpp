#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "resgrad/backend.hpp"
#include "resgrad/forward.hpp"
#include "resgrad/training.hpp"

namespace resgrad {

inline constexpr int kConfigSchema = 1;

enum class BackendKind { scripted, http };
std::string_view to_string(BackendKind k) noexcept;

struct BackendSettings {
  BackendKind kind = BackendKind::scripted;
  std::string base_url;
  std::string model;
  /// Script table for scripted backends.
  std::filesystem::path script;
  std::uint64_t seed = 42;
  int max_attempts = 3;
  int base_backoff_ms = 500;
};

/// Everything a run needs. Paths are kept as written and resolved against
/// `base_dir` (the config file's directory) on use.
struct RunConfig {
  std::filesystem::path base_dir;
  std::filesystem::path graph;
  std::filesystem::path train_data;
  std::filesystem::path dev_data;
  std::filesystem::path test_data;
  TrainConfig train;
  TruncationPolicy truncation;
  BackendSettings forward;
  BackendSettings projector;
  BackendSettings optimizer;
  std::filesystem::path output_dir = "out";

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

nlohmann::ordered_json config_to_json(const RunConfig& c);

/// Builds a config from parsed JSON, filling defaults. Throws
/// ValidationError listing every violation, each prefixed by its field path.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Throws ParseError on malformed JSON, ValidationError on bad contents or
/// missing referenced files.
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& c, const std::filesystem::path& path);

/// Referenced-file checks; empty when everything exists.
std::vector<std::string> check_config_files(const RunConfig& c);

std::shared_ptr<Backend> make_backend(const BackendSettings& settings, const RunConfig& config);

}  // namespace resgrad
