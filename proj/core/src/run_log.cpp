#include "resgrad/run_log.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "json_io.hpp"

namespace resgrad {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

}  // namespace

RunLog::RunLog(const std::filesystem::path& path) : path_(path) {
  if (std::filesystem::exists(path)) {
    const auto events = read_run_log(path);
    if (!events.empty()) next_seq_ = events.back().seq + 1;
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open run log " + path.string());
}

std::uint64_t RunLog::append(const std::string& type, nlohmann::ordered_json data) {
  std::lock_guard lock(mu_);
  nlohmann::ordered_json line;
  const auto seq = next_seq_++;
  line["seq"] = seq;
  line["time"] = utc_now();
  line["type"] = type;
  line["data"] = std::move(data);
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw Error("write failed for run log " + path_.string());
  return seq;
}

std::vector<LogEvent> read_run_log(const std::filesystem::path& path) {
  const auto text = detail::read_text_file(path);
  std::vector<LogEvent> events;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t consumed = 0;
  while (std::getline(in, line)) {
    ++lineno;
    consumed += line.size() + 1;
    if (line.empty()) continue;
    const bool last = consumed >= text.size();
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      if (last && text.back() != '\n') break;
      throw ParseError(path.string(), lineno, e.what());
    }
    LogEvent ev;
    try {
      ev.seq = j.at("seq").get<std::uint64_t>();
      ev.time = j.at("time").get<std::string>();
      ev.type = j.at("type").get<std::string>();
      ev.data = j.at("data");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    if (!events.empty() && ev.seq <= events.back().seq)
      throw ParseError(path.string(), lineno, "sequence numbers must increase");
    events.push_back(std::move(ev));
  }
  return events;
}

int last_completed_step(const std::vector<LogEvent>& events) {
  int last = 0;
  for (const auto& e : events)
    if (e.type == "step") last = std::max(last, e.data.at("step").get<int>());
  return last;
}

Graph replay_prompts(const Graph& initial, const std::vector<LogEvent>& events, std::optional<int> up_to_step) {
  Graph g = initial;
  for (const auto& e : events) {
    if (e.type != "prompt_change") continue;
    if (up_to_step && e.data.at("step").get<int>() > *up_to_step) continue;
    const auto id = e.data.at("component").get<std::string>();
    auto* c = g.find(id);
    if (!c) throw UnknownComponent(id);
    c->prompt_text = e.data.at("prompt").get<std::string>();
  }
  return g;
}

nlohmann::ordered_json to_json(const RoutingRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["example"] = r.example;
  j["component"] = r.component;
  j["local_present"] = r.local_present;
  j["upstream"] = r.upstream_feedback ? "feedback" : "stop";
  j["feedback_tokens"] = r.feedback_tokens;
  return j;
}

RunLogObserver::RunLogObserver(RunLog& log, std::filesystem::path checkpoint_path)
    : log_(log), checkpoint_path_(std::move(checkpoint_path)) {}

void RunLogObserver::on_routing(const std::vector<RoutingRecord>& records) {
  for (const auto& r : records) log_.append("routing", to_json(r));
}

void RunLogObserver::on_error(int step, int example, const std::string& what) {
  nlohmann::ordered_json d;
  d["step"] = step;
  d["example"] = example;
  d["what"] = what;
  log_.append("error", std::move(d));
}

void RunLogObserver::on_prompt_change(int step, const std::string& component, const std::string& prompt) {
  nlohmann::ordered_json d;
  d["step"] = step;
  d["component"] = component;
  d["prompt"] = prompt;
  log_.append("prompt_change", std::move(d));
}

void RunLogObserver::on_step(const StepRecord& record, const Checkpoint& best) {
  if (record.action == "update" && !checkpoint_path_.empty()) save_checkpoint(best, checkpoint_path_);
  log_.append("step", to_json(record));
}

}  // namespace resgrad
