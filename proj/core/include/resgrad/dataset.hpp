#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resgrad/context.hpp"
#include "resgrad/forward.hpp"

namespace resgrad {

/// One dataset record. On disk (JSON lines):
///   {"input": {"question": "..."}, "gold": {"answer": "...", "metric": "f1"}}
/// `gold` names exactly one answer field besides "metric".
struct Example {
  Context input;
  std::optional<GoldSpec> gold;
};

Example example_from_json(const nlohmann::ordered_json& j, const std::string& where);
nlohmann::ordered_json example_to_json(const Example& example);

std::vector<Example> parse_dataset(const std::string& jsonl, const std::string& where);
std::vector<Example> load_dataset(const std::filesystem::path& path);

}  // namespace resgrad
