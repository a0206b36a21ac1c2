#pragma once

#include <filesystem>
#include <vector>

#include "resgrad/training.hpp"

namespace resgrad {

/// File names written by export_metrics.
inline constexpr const char* kHistoryFile = "history.jsonl";
inline constexpr const char* kTokensFile = "tokens_per_step.csv";
inline constexpr const char* kDensityFile = "density_history.csv";
inline constexpr const char* kRoutingFile = "routing.jsonl";
inline constexpr const char* kBestPromptsFile = "best_prompts.json";

/// Writes history.jsonl (one step per line), tokens_per_step.csv,
/// density_history.csv (end-of-step rho), routing.jsonl and
/// best_prompts.json into out_dir. Returns the written paths.
std::vector<std::filesystem::path> export_metrics(const TrainHistory& history, const std::filesystem::path& out_dir);

}  // namespace resgrad
