#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "resgrad/context.hpp"
#include "resgrad/errors.hpp"
#include "resgrad/graph.hpp"

using namespace resgrad;
using resgrad::test::llm_chain;
using resgrad::test::llm_node;
using resgrad::test::tool_node;

namespace {

bool has_kind(const ValidationReport& r, Violation::Kind k) {
  for (const auto& v : r.violations)
    if (v.kind == k) return true;
  return false;
}

std::size_t count_kind(const ValidationReport& r, Violation::Kind k) {
  std::size_t n = 0;
  for (const auto& v : r.violations) n += v.kind == k;
  return n;
}

}  // namespace

TEST(Context, PreservesFirstInsertionOrder) {
  Context c;
  c.set("b", "1");
  c.set("a", "2");
  c.set("b", "3");
  EXPECT_EQ(c.keys(), (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(c.at("b"), "3");
  EXPECT_EQ(c.size(), 2u);
}

TEST(Context, AtThrowsMissingField) {
  Context c{{"q", "a"}};
  EXPECT_THROW(c.at("nope"), MissingField);
  EXPECT_EQ(c.find("nope"), nullptr);
}

TEST(Context, EraseRemovesKey) {
  Context c{{"q", "a"}, {"r", "b"}};
  EXPECT_TRUE(c.erase("q"));
  EXPECT_FALSE(c.erase("q"));
  EXPECT_EQ(c.keys(), std::vector<std::string>{"r"});
}

TEST(Merge, DisjointKeys) {
  const Context c{{"q", "a"}};
  const auto m = merge_outputs(c, Context{{"rw", "b"}});
  EXPECT_EQ(m, (Context{{"q", "a"}, {"rw", "b"}}));
}

TEST(Merge, EmptyDeltaIsIdentity) {
  const Context c{{"q", "a"}};
  EXPECT_EQ(merge_outputs(c, {}), c);
}

TEST(Merge, DeltaWinsOnCollisionAndKeepsPosition) {
  const Context c{{"q", "a"}, {"x", "old"}, {"z", "c"}};
  const auto m = merge_outputs(c, Context{{"x", "new"}, {"w", "d"}});
  EXPECT_EQ(m.keys(), (std::vector<std::string>{"q", "x", "z", "w"}));
  EXPECT_EQ(m.at("x"), "new");
  EXPECT_EQ(m.at("q"), "a");
  EXPECT_EQ(m.at("z"), "c");
}

TEST(Merge, TwentyStepChainKeepsEveryValue) {
  // Replay independently: each key's expected value is whatever was written.
  Context state{{"k0", "value-0"}};
  std::vector<std::pair<std::string, std::string>> written{{"k0", "value-0"}};
  for (int i = 1; i <= 20; ++i) {
    const auto key = "k" + std::to_string(i);
    const auto value = "value-" + std::to_string(i) + std::string(static_cast<std::size_t>(i), '#');
    state = merge_outputs(state, Context{{key, value}});
    written.emplace_back(key, value);
  }
  ASSERT_EQ(state.size(), 21u);
  for (const auto& [k, v] : written) EXPECT_EQ(state.at(k), v) << k;
}

TEST(Projection, SelectsDeclaredFields) {
  const Context c{{"question", "q1"}, {"noise", "x"}};
  const auto node = llm_node("n", {"question"}, {"out"}, "p");
  EXPECT_EQ(project_inputs(c, node), (Context{{"question", "q1"}}));
}

TEST(Projection, AllFieldsIsIdentity) {
  const Context c{{"a", "1"}, {"b", "2"}};
  EXPECT_EQ(project_inputs(c, llm_node("n", {"a", "b"}, {"out"}, "p")), c);
}

TEST(Projection, FollowsDeclaredOrder) {
  const Context c{{"a", "1"}, {"b", "2"}};
  EXPECT_EQ(project_inputs(c, llm_node("n", {"b", "a"}, {"out"}, "p")).keys(), (std::vector<std::string>{"b", "a"}));
}

TEST(Projection, IndependentOfExcludedFields) {
  Context c;
  for (int i = 0; i < 10; ++i) c.set("k" + std::to_string(i), "v" + std::to_string(i));
  const auto node = llm_node("n", {"k3", "k7"}, {"out"}, "p");
  const auto base = project_inputs(c, node);
  ASSERT_EQ(base.size(), 2u);
  for (int i = 0; i < 10; ++i) {
    if (i == 3 || i == 7) continue;
    Context mutated = c;
    mutated.set("k" + std::to_string(i), "mutated");
    EXPECT_EQ(project_inputs(mutated, node), base);
  }
}

TEST(Projection, MissingFieldThrows) {
  EXPECT_THROW(project_inputs(Context{{"a", "1"}}, llm_node("n", {"b"}, {"out"}, "p")), MissingField);
}

TEST(Validate, WellFormedChainIsClean) {
  Graph g;
  g.task_inputs = {"question"};
  g.components = {llm_node("rewriter", {"question"}, {"rewritten"}, "Rewrite."),
                  llm_node("extractor", {"rewritten"}, {"facts"}, "Extract.")};
  EXPECT_TRUE(validate_graph(g).ok());
}

TEST(Validate, UnboundInput) {
  Graph g;
  g.task_inputs = {"question"};
  g.components = {llm_node("extractor", {"rewritten"}, {"facts"}, "Extract.")};
  const auto r = validate_graph(g);
  EXPECT_TRUE(has_kind(r, Violation::Kind::unbound_input));
  EXPECT_EQ(r.violations.front().field, "rewritten");
}

TEST(Validate, ForwardReference) {
  Graph g;
  g.task_inputs = {"question"};
  g.components = {llm_node("a", {"later"}, {"x"}, "A."), llm_node("b", {"question"}, {"later"}, "B.")};
  EXPECT_TRUE(has_kind(validate_graph(g), Violation::Kind::forward_reference));
  EXPECT_THROW(topological_order(g), CycleOrForwardReference);
}

TEST(Validate, DuplicateOutputsMatchBruteForcePairs) {
  Graph g;
  g.task_inputs = {"question"};
  g.components = {llm_node("a", {"question"}, {"answer", "x"}, "A."), llm_node("b", {"question"}, {"answer"}, "B."),
                  llm_node("c", {"question"}, {"answer", "y"}, "C."), llm_node("d", {"question"}, {"y"}, "D."),
                  llm_node("e", {"question"}, {"question"}, "E.")};
  // Oracle: every unordered pair of producers (task input included) that
  // shares an output name.
  std::vector<std::pair<std::string, std::vector<std::string>>> producers{{"__input__", g.task_inputs}};
  for (const auto& c : g.components) producers.emplace_back(c.id, c.output_fields);
  std::set<std::string> expected;
  for (std::size_t i = 0; i < producers.size(); ++i)
    for (std::size_t j = i + 1; j < producers.size(); ++j)
      for (const auto& f : producers[i].second)
        for (const auto& h : producers[j].second)
          if (f == h) expected.insert(producers[i].first + "|" + producers[j].first + "|" + f);

  const std::string prefix = "also produced by ";
  std::set<std::string> got;
  for (const auto& v : validate_graph(g).violations) {
    if (v.kind != Violation::Kind::duplicate_output) continue;
    ASSERT_EQ(v.message.rfind(prefix, 0), 0u);
    got.insert(v.message.substr(prefix.size()) + "|" + v.component + "|" + v.field);
  }
  EXPECT_EQ(got, expected);
  EXPECT_EQ(count_kind(validate_graph(g), Violation::Kind::duplicate_output), expected.size());
}

TEST(Validate, StructuralFieldRules) {
  Graph g;
  g.task_inputs = {"question"};
  auto bad = llm_node("bad", {"question", "question"}, {}, "");
  bad.is_tool = true;
  bad.optimizable = true;
  bad.decoding.temperature = 3.0;
  bad.decoding.max_new_tokens = 0;
  auto bad_name = llm_node("name", {"Question"}, {"ok_out"}, "p");
  g.components = {bad, bad_name};
  const auto r = validate_graph(g);
  EXPECT_TRUE(has_kind(r, Violation::Kind::duplicate_field));
  EXPECT_TRUE(has_kind(r, Violation::Kind::empty_fields));
  EXPECT_TRUE(has_kind(r, Violation::Kind::optimizable_tool));
  EXPECT_TRUE(has_kind(r, Violation::Kind::empty_prompt));
  EXPECT_TRUE(has_kind(r, Violation::Kind::invalid_decoding));
  EXPECT_TRUE(has_kind(r, Violation::Kind::invalid_field_name));
}

TEST(Validate, DuplicateIds) {
  Graph g;
  g.task_inputs = {"question"};
  g.components = {llm_node("a", {"question"}, {"x"}, "A."), llm_node("a", {"x"}, {"y"}, "B.")};
  EXPECT_TRUE(has_kind(validate_graph(g), Violation::Kind::duplicate_id));
}

TEST(FieldNames, Syntax) {
  EXPECT_TRUE(is_valid_field_name("rewritten_query_2"));
  EXPECT_FALSE(is_valid_field_name(""));
  EXPECT_FALSE(is_valid_field_name("Rewritten"));
  EXPECT_FALSE(is_valid_field_name("a-b"));
}

TEST(Topology, FiveNodeChainInDeclarationOrder) {
  Graph g;
  g.task_inputs = {"question"};
  g.components = {llm_node("question_rewriter", {"question"}, {"rewritten_query"}, "p"),
                  llm_node("info_extractor", {"rewritten_query"}, {"search_terms"}, "p"),
                  tool_node("wikipedia_retriever", {"search_terms"}, {"evidence"}),
                  llm_node("hint_generator", {"question", "evidence"}, {"hints"}, "p"),
                  llm_node("answer_generator", {"question", "hints", "evidence"}, {"answer"}, "p")};
  EXPECT_EQ(topological_order(g),
            (std::vector<std::string>{"question_rewriter", "info_extractor", "wikipedia_retriever", "hint_generator",
                                      "answer_generator"}));
  EXPECT_EQ(producers_of(g, "answer_generator"), (std::vector<std::string>{"wikipedia_retriever", "hint_generator"}));
  EXPECT_EQ(consumers_of(g, "wikipedia_retriever"), (std::vector<std::string>{"hint_generator", "answer_generator"}));
  EXPECT_EQ(optimizable_ids(g).size(), 4u);
}

TEST(Topology, SingleNode) {
  EXPECT_EQ(topological_order(llm_chain(1)), std::vector<std::string>{"n1"});
}

TEST(Topology, PermutedChainThrows) {
  auto g = llm_chain(3);
  std::swap(g.components[0], g.components[2]);
  EXPECT_THROW(topological_order(g), CycleOrForwardReference);
}

TEST(GraphJson, RoundTripIsBitExact) {
  resgrad::test::TempDir dir;
  Graph g = llm_chain(3);
  g.components[1].decoding = {0.3, 77};
  g.components[2].model = "small-model";
  g.components.push_back(tool_node("identity_copy", {"f3"}, {"copy"}));
  save_graph(g, dir / "g.json");
  const auto loaded = load_graph(dir / "g.json");
  EXPECT_EQ(loaded, g);
  save_graph(loaded, dir / "g2.json");
  EXPECT_EQ(resgrad::test::slurp(dir / "g.json"), resgrad::test::slurp(dir / "g2.json"));
}

TEST(GraphJson, MalformedReportsLine) {
  resgrad::test::TempDir dir;
  resgrad::test::spit(dir / "bad.json", "{\n  \"task_inputs\": [\"q\"],\n  \"components\": [,]\n}\n");
  try {
    load_graph(dir / "bad.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(GraphJson, MissingRequiredKey) {
  EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"components": []})")), ParseError);
  EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"task_inputs": [], "components": [{"id": "a"}]})")),
               ParseError);
}
