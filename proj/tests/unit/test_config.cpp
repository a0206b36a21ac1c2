#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "resgrad/config.hpp"
#include "resgrad/errors.hpp"

using namespace resgrad;
using nlohmann::json;
using resgrad::test::spit;
using resgrad::test::TempDir;

namespace {

json minimal() {
  return json::parse(R"({
    "schema": 1,
    "graph": "graph.json",
    "datasets": {"train": "train.jsonl", "dev": "dev.jsonl"},
    "backends": {
      "forward": {"kind": "scripted", "script": "f.json"},
      "projector": {"kind": "scripted", "script": "p.json"},
      "optimizer": {"kind": "http", "base_url": "http://localhost:1/v1"}
    }
  })");
}

bool mentions(const ValidationError& e, const std::string& needle) {
  for (const auto& v : e.violations())
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

ValidationError violations_of(const json& j) {
  try {
    config_from_json(j, ".");
  } catch (const ValidationError& e) {
    return e;
  }
  return ValidationError({});
}

}  // namespace

TEST(Config, MinimalFillsReferenceDefaults) {
  const auto c = config_from_json(minimal(), "/base");
  EXPECT_EQ(c.train.steps, 100);
  EXPECT_EQ(c.train.batch_size, 8);
  EXPECT_EQ(c.train.update_freq, 1);
  EXPECT_EQ(c.train.eval_time, 3);
  EXPECT_EQ(c.train.test_repeats, 3);
  EXPECT_EQ(c.train.max_concurrency, 20);
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.train.strategy, Strategy::density_boltzmann);
  EXPECT_EQ(c.train.tau, 1.0);
  EXPECT_EQ(c.train.projector.temperature, 0.4);
  EXPECT_EQ(c.train.projector.max_new_tokens, 1024);
  EXPECT_EQ(c.train.optimizer.temperature, 0.7);
  EXPECT_EQ(c.train.optimizer.max_new_tokens, 512);
  EXPECT_EQ(c.forward.max_attempts, 3);
  EXPECT_EQ(c.forward.base_backoff_ms, 500);
  EXPECT_EQ(c.optimizer.kind, BackendKind::http);
  EXPECT_EQ(c.output_dir, "out");
  EXPECT_EQ(c.resolve("graph.json"), std::filesystem::path("/base/graph.json"));
  EXPECT_EQ(c.resolve("/abs/x"), std::filesystem::path("/abs/x"));
}

TEST(Config, UnknownStrategyNamesField) {
  auto j = minimal();
  j["scheduler"]["strategy"] = "foo";
  const auto e = violations_of(j);
  ASSERT_EQ(e.violations().size(), 1u);
  EXPECT_EQ(e.violations()[0].rfind("scheduler.strategy:", 0), 0u);
  EXPECT_TRUE(mentions(e, "foo"));
}

TEST(Config, CollectsEveryViolation) {
  auto j = minimal();
  j["schema"] = 2;
  j["train"]["steps"] = 0;
  j["train"]["batch_size"] = "eight";
  j["scheduler"]["tau"] = -1.0;
  j["bogus"] = true;
  j["backends"]["projector"]["temperature"] = 5.0;
  j["backends"]["forward"].erase("script");
  const auto e = violations_of(j);
  for (const char* field : {"schema", "train.steps", "train.batch_size", "scheduler.tau", "bogus",
                            "backends.projector.temperature", "backends.forward.script"})
    EXPECT_TRUE(mentions(e, std::string(field) + ":")) << field;
}

TEST(Config, RequiredSections) {
  const auto e = violations_of(json::parse(R"({"schema": 1})"));
  for (const char* field : {"graph:", "datasets.train:", "datasets.dev:", "backends.forward:"})
    EXPECT_TRUE(mentions(e, field)) << field;
  EXPECT_THROW(config_from_json(json::array(), "."), ValidationError);
}

TEST(Config, SaveLoadRoundTrip) {
  TempDir dir;
  for (const char* f : {"graph.json", "train.jsonl", "dev.jsonl", "f.json", "p.json"}) spit(dir / f, "{}");
  auto c = config_from_json(minimal(), dir.path());
  c.train.steps = 7;
  c.train.strategy = Strategy::greedy;
  c.train.tau = 0.5;
  c.truncation.caps["trace"] = 3000;
  c.train.projector.temperature = 0.2;
  save_config(c, dir / "config.json");
  const auto back = load_config(dir / "config.json");
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  save_config(back, dir / "again.json");
  EXPECT_EQ(resgrad::test::slurp(dir / "config.json"), resgrad::test::slurp(dir / "again.json"));
}

TEST(Config, MalformedJsonReportsLine) {
  TempDir dir;
  spit(dir / "config.json", "{\n  \"schema\": 1,\n  oops\n}\n");
  try {
    load_config(dir / "config.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Config, MissingReferencedFiles) {
  TempDir dir;
  spit(dir / "config.json", minimal().dump());
  spit(dir / "graph.json", "{}");
  try {
    load_config(dir / "config.json");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "datasets.train: file not found"));
    EXPECT_TRUE(mentions(e, "backends.forward.script: file not found"));
    EXPECT_FALSE(mentions(e, "graph:"));
  }
}

TEST(Config, MakeBackendWrapsRetries) {
  const auto c = config_from_json(minimal(), ".");
  auto settings = c.optimizer;
  EXPECT_NE(dynamic_cast<RetryingBackend*>(make_backend(settings, c).get()), nullptr);
  settings.max_attempts = 1;
  EXPECT_EQ(dynamic_cast<RetryingBackend*>(make_backend(settings, c).get()), nullptr);
}

TEST(Config, ShippedScenarioLoads) {
  const auto c = load_config(resgrad::test::source_path("scenarios/defective_node/config.json"));
  EXPECT_EQ(c.train.steps, 10);
  EXPECT_FALSE(c.test_data.empty());
}
