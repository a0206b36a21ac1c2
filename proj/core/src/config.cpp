#include "resgrad/config.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "json_io.hpp"
#include "resgrad/http_backend.hpp"
#include "resgrad/scripted_backend.hpp"

namespace resgrad {

std::string_view to_string(BackendKind k) noexcept { return k == BackendKind::http ? "http" : "scripted"; }

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Reads typed fields out of one JSON object, recording violations instead of
// throwing so every problem is reported at once.
class Reader {
 public:
  Reader(const json& obj, std::string prefix, std::vector<std::string>& out)
      : obj_(obj), prefix_(std::move(prefix)), out_(out) {
    if (!obj_.is_object()) fail("", "expected an object");
  }

  bool ok() const { return obj_.is_object(); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!ok()) return nullptr;
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  void fail(const std::string& key, const std::string& what) {
    out_.push_back((key.empty() ? prefix_ : name(key)) + ": " + what);
  }

  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  template <class T>
  void integer(const std::string& key, T& dst, long long min) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_number_integer()) return fail(key, "expected an integer");
    const auto x = v->get<long long>();
    if (x < min) return fail(key, "must be >= " + std::to_string(min));
    dst = static_cast<T>(x);
  }

  void number(const std::string& key, double& dst, bool strictly_positive) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_number()) return fail(key, "expected a number");
    const double x = v->get<double>();
    if (strictly_positive ? !(x > 0) : !(x >= 0)) return fail(key, strictly_positive ? "must be > 0" : "must be >= 0");
    dst = x;
  }

  void string(const std::string& key, std::string& dst) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_string()) return fail(key, "expected a string");
    dst = v->get<std::string>();
  }

  void path(const std::string& key, std::filesystem::path& dst, bool required) {
    const json* v = get(key);
    if (!v) {
      if (required) fail(key, "required");
      return;
    }
    if (!v->is_string() || v->get<std::string>().empty()) return fail(key, "expected a non-empty path");
    dst = v->get<std::string>();
  }

  void finish() {
    if (!ok()) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& out_;
  std::set<std::string> seen_;
};

const json& child(const json& parent, const char* key) {
  static const json empty = json::object();
  if (!parent.is_object()) return empty;
  auto it = parent.find(key);
  return it == parent.end() || it->is_null() ? empty : *it;
}

void read_backend(const json& j, const std::string& name, BackendSettings& b, double* temperature, int* max_tokens,
                  std::vector<std::string>& errors) {
  Reader r(j, "backends." + name, errors);
  if (const json* kind = r.get("kind")) {
    if (!kind->is_string())
      r.fail("kind", "expected a string");
    else if (*kind == "scripted")
      b.kind = BackendKind::scripted;
    else if (*kind == "http")
      b.kind = BackendKind::http;
    else
      r.fail("kind", "unknown backend kind '" + kind->get<std::string>() + "'");
  }
  r.string("base_url", b.base_url);
  r.string("model", b.model);
  r.path("script", b.script, false);
  r.integer("seed", b.seed, 0);
  r.integer("max_attempts", b.max_attempts, 1);
  r.integer("base_backoff_ms", b.base_backoff_ms, 0);
  if (temperature) r.number("temperature", *temperature, false);
  if (max_tokens) r.integer("max_new_tokens", *max_tokens, 1);
  r.finish();
  if (!r.ok()) return;
  if (b.kind == BackendKind::scripted && b.script.empty()) r.fail("script", "required for scripted backends");
  if (b.kind == BackendKind::http && b.base_url.empty()) r.fail("base_url", "required for http backends");
}

ordered_json backend_json(const BackendSettings& b, const double* temperature, const int* max_tokens) {
  ordered_json j;
  j["kind"] = to_string(b.kind);
  if (!b.base_url.empty()) j["base_url"] = b.base_url;
  if (!b.model.empty()) j["model"] = b.model;
  if (!b.script.empty()) j["script"] = b.script.generic_string();
  j["seed"] = b.seed;
  j["max_attempts"] = b.max_attempts;
  j["base_backoff_ms"] = b.base_backoff_ms;
  if (temperature) j["temperature"] = *temperature;
  if (max_tokens) j["max_new_tokens"] = *max_tokens;
  return j;
}

}  // namespace

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["schema"] = kConfigSchema;
  j["graph"] = c.graph.generic_string();
  j["datasets"]["train"] = c.train_data.generic_string();
  j["datasets"]["dev"] = c.dev_data.generic_string();
  if (!c.test_data.empty()) j["datasets"]["test"] = c.test_data.generic_string();
  auto& t = j["train"];
  t["steps"] = c.train.steps;
  t["batch_size"] = c.train.batch_size;
  t["update_freq"] = c.train.update_freq;
  t["eval_time"] = c.train.eval_time;
  t["test_repeats"] = c.train.test_repeats;
  t["max_concurrency"] = c.train.max_concurrency;
  t["seed"] = c.train.seed;
  j["scheduler"]["strategy"] = to_string(c.train.strategy);
  j["scheduler"]["tau"] = c.train.tau;
  ordered_json caps = ordered_json::object();
  for (const auto& [field, cap] : c.truncation.caps) caps[field] = cap;
  j["truncation"]["caps"] = caps;
  j["truncation"]["top_k"] = c.truncation.top_k;
  j["backends"]["forward"] = backend_json(c.forward, nullptr, nullptr);
  j["backends"]["projector"] =
      backend_json(c.projector, &c.train.projector.temperature, &c.train.projector.max_new_tokens);
  j["backends"]["optimizer"] =
      backend_json(c.optimizer, &c.train.optimizer.temperature, &c.train.optimizer.max_new_tokens);
  j["output_dir"] = c.output_dir.generic_string();
  return j;
}

RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  std::vector<std::string> errors;
  RunConfig c;
  c.base_dir = base_dir;

  Reader root(j, "", errors);
  if (!root.ok()) throw ValidationError({"config: expected a JSON object"});
  if (const json* schema = root.get("schema")) {
    if (!schema->is_number_integer() || schema->get<long long>() != kConfigSchema)
      root.fail("schema", "unsupported schema version (expected " + std::to_string(kConfigSchema) + ")");
  } else {
    root.fail("schema", "required");
  }
  root.path("graph", c.graph, true);
  root.path("output_dir", c.output_dir, false);
  root.get("datasets");
  root.get("train");
  root.get("scheduler");
  root.get("truncation");
  root.get("backends");
  root.finish();

  {
    Reader r(child(j, "datasets"), "datasets", errors);
    r.path("train", c.train_data, true);
    r.path("dev", c.dev_data, true);
    r.path("test", c.test_data, false);
    r.finish();
  }
  {
    Reader r(child(j, "train"), "train", errors);
    r.integer("steps", c.train.steps, 1);
    r.integer("batch_size", c.train.batch_size, 1);
    r.integer("update_freq", c.train.update_freq, 1);
    r.integer("eval_time", c.train.eval_time, 1);
    r.integer("test_repeats", c.train.test_repeats, 1);
    r.integer("max_concurrency", c.train.max_concurrency, 1);
    r.integer("seed", c.train.seed, 0);
    r.finish();
  }
  {
    Reader r(child(j, "scheduler"), "scheduler", errors);
    if (const json* s = r.get("strategy")) {
      if (!s->is_string()) {
        r.fail("strategy", "expected a string");
      } else {
        try {
          c.train.strategy = strategy_from_string(s->get<std::string>());
        } catch (const Error&) {
          r.fail("strategy", "unknown strategy '" + s->get<std::string>() + "'");
        }
      }
    }
    r.number("tau", c.train.tau, true);
    r.finish();
  }
  {
    Reader r(child(j, "truncation"), "truncation", errors);
    if (const json* caps = r.get("caps")) {
      if (!caps->is_object()) {
        r.fail("caps", "expected an object");
      } else {
        for (auto it = caps->begin(); it != caps->end(); ++it) {
          if (!it->is_number_integer() || it->get<long long>() < 0)
            r.fail("caps." + it.key(), "expected a non-negative integer");
          else
            c.truncation.caps[it.key()] = it->get<std::size_t>();
        }
      }
    }
    r.integer("top_k", c.truncation.top_k, 1);
    r.finish();
  }
  {
    const json& backends = child(j, "backends");
    Reader r(backends, "backends", errors);
    for (const char* name : {"forward", "projector", "optimizer"})
      if (!r.get(name)) r.fail(name, "required");
    r.finish();
    read_backend(child(backends, "forward"), "forward", c.forward, nullptr, nullptr, errors);
    read_backend(child(backends, "projector"), "projector", c.projector, &c.train.projector.temperature,
                 &c.train.projector.max_new_tokens, errors);
    read_backend(child(backends, "optimizer"), "optimizer", c.optimizer, &c.train.optimizer.temperature,
                 &c.train.optimizer.max_new_tokens, errors);
    c.train.projector.model = c.projector.model;
    c.train.optimizer.model = c.optimizer.model;
  }

  // Range checks the readers do not cover; skip fields already reported.
  for (auto& v : c.train.violations()) {
    const auto field = v.substr(0, v.find(':') + 1);
    if (std::none_of(errors.begin(), errors.end(), [&](const std::string& e) { return e.rfind(field, 0) == 0; }))
      errors.push_back(std::move(v));
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return c;
}

std::vector<std::string> check_config_files(const RunConfig& c) {
  std::vector<std::string> errors;
  auto check = [&](const std::string& name, const std::filesystem::path& p) {
    if (p.empty()) return;
    if (!std::filesystem::is_regular_file(c.resolve(p))) errors.push_back(name + ": file not found: " + c.resolve(p).string());
  };
  check("graph", c.graph);
  check("datasets.train", c.train_data);
  check("datasets.dev", c.dev_data);
  check("datasets.test", c.test_data);
  if (c.forward.kind == BackendKind::scripted) check("backends.forward.script", c.forward.script);
  if (c.projector.kind == BackendKind::scripted) check("backends.projector.script", c.projector.script);
  if (c.optimizer.kind == BackendKind::scripted) check("backends.optimizer.script", c.optimizer.script);
  return errors;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ValidationError({"config: file not found: " + path.string()});
  auto c = config_from_json(detail::read_json_file(path), path.parent_path());
  auto missing = check_config_files(c);
  if (!missing.empty()) throw ValidationError(std::move(missing));
  return c;
}

void save_config(const RunConfig& c, const std::filesystem::path& path) {
  detail::write_text_file(path, config_to_json(c).dump(2) + "\n");
}

std::shared_ptr<Backend> make_backend(const BackendSettings& settings, const RunConfig& config) {
  std::shared_ptr<Backend> inner;
  if (settings.kind == BackendKind::scripted) {
    inner = std::make_shared<ScriptedBackend>(ScriptTable::load(config.resolve(settings.script)), settings.seed);
  } else {
    HttpBackendConfig http;
    http.base_url = settings.base_url;
    http.model = settings.model;
    inner = std::make_shared<HttpBackend>(std::move(http));
  }
  if (settings.max_attempts <= 1) return inner;
  return std::make_shared<RetryingBackend>(std::move(inner), settings.max_attempts,
                                           std::chrono::milliseconds(settings.base_backoff_ms));
}

}  // namespace resgrad
