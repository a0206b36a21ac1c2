#include "resgrad/dataset.hpp"

#include "json_io.hpp"
#include "resgrad/text.hpp"

namespace resgrad {

Example example_from_json(const nlohmann::ordered_json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("input") || !j["input"].is_object())
    throw ParseError(where, 0, "record needs an 'input' object");
  Example ex;
  for (const auto& [k, v] : j["input"].items()) {
    if (!v.is_string()) throw ParseError(where, 0, "input field '" + k + "' must be a string");
    ex.input.set(k, v.get<std::string>());
  }
  if (j.contains("gold") && !j["gold"].is_null()) {
    const auto& g = j["gold"];
    if (!g.is_object()) throw ParseError(where, 0, "'gold' must be an object");
    GoldSpec gold;
    try {
      gold.metric = metric_from_string(g.value("metric", std::string("exact_match")));
    } catch (const Error& e) {
      throw ParseError(where, 0, e.what());
    }
    int answers = 0;
    for (const auto& [k, v] : g.items()) {
      if (k == "metric") continue;
      if (!v.is_string()) throw ParseError(where, 0, "gold field '" + k + "' must be a string");
      gold.field = k;
      gold.value = v.get<std::string>();
      ++answers;
    }
    if (answers != 1) throw ParseError(where, 0, "'gold' must name exactly one answer field");
    ex.gold = std::move(gold);
  }
  return ex;
}

nlohmann::ordered_json example_to_json(const Example& example) {
  nlohmann::ordered_json j;
  j["input"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : example.input) j["input"][k] = v;
  if (example.gold) {
    j["gold"] = {{example.gold->field, example.gold->value}, {"metric", to_string(example.gold->metric)}};
  }
  return j;
}

std::vector<Example> parse_dataset(const std::string& jsonl, const std::string& where) {
  std::vector<Example> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    if (nl == std::string::npos) nl = jsonl.size();
    ++line_no;
    const auto line = trim(std::string_view(jsonl).substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where, line_no, e.what());
    }
    try {
      out.push_back(example_from_json(j, where));
    } catch (const ParseError& e) {
      throw ParseError(where, line_no, e.what());
    }
  }
  return out;
}

std::vector<Example> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(detail::read_text_file(path), path.string());
}

}  // namespace resgrad
