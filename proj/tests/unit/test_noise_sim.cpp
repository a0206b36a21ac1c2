#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "resgrad/errors.hpp"
#include "resgrad/noise_sim.hpp"

using namespace resgrad;
using resgrad::test::llm_chain;
using resgrad::test::script;

namespace {

// V_k = (1-p)(V_{k-1} + σ²), V_0 = 0.
double routed_recurrence(int k, double sigma2, double p) {
  double v = 0.0;
  for (int i = 0; i < k; ++i) v = (1.0 - p) * (v + sigma2);
  return v;
}

// Each node copies the last line of its user message.
ScriptTable echo_script() {
  ScriptRule r;
  r.pattern = "([^\\n]*)$";
  r.responses = {"$1"};
  return script({r}, "");
}

std::vector<Trajectory> echo_batch(const Graph& g, const std::vector<std::string>& questions) {
  ScriptedBackend b(echo_script());
  std::vector<Trajectory> out;
  for (const auto& q : questions) out.push_back(run_forward(g, Context{{"question", q}}, b, {}).trajectory);
  return out;
}

}  // namespace

TEST(ClosedForm, ReferenceValues) {
  EXPECT_EQ(variance_closed_form(20, 1.0, 0.0, true), 20.0);
  EXPECT_EQ(variance_closed_form(20, 1.0, 0.5, false), 20.0);
  EXPECT_EQ(variance_closed_form(7, 2.5, 1.0, true), 0.0);
  EXPECT_EQ(variance_closed_form(0, 1.0, 0.5, true), 0.0);
  EXPECT_EQ(routed_variance_limit(1.0, 0.5), 1.0);
  EXPECT_NEAR(routed_variance_limit(2.0, 0.2), 8.0, 1e-12);
  EXPECT_TRUE(std::isinf(routed_variance_limit(1.0, 0.0)));
}

TEST(ClosedForm, MatchesRecurrence) {
  for (double p : {1e-6, 0.01, 0.1, 0.25, 0.5, 0.9, 0.999})
    for (double s2 : {0.5, 1.0, 3.0})
      for (int k = 1; k <= 200; k += 7) {
        const double oracle = routed_recurrence(k, s2, p);
        EXPECT_NEAR(variance_closed_form(k, s2, p, true), oracle, 1e-12 * std::max(1.0, oracle))
            << "p=" << p << " k=" << k;
      }
}

TEST(ClosedForm, BoundedAndMonotone) {
  for (double p : {0.05, 0.3, 0.5, 0.8}) {
    const double limit = routed_variance_limit(1.0, p);
    double prev = 0.0;
    for (int k = 1; k <= 500; ++k) {
      const double v = variance_closed_form(k, 1.0, p, true);
      EXPECT_LE(v, limit * (1 + 1e-12));
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
  for (int k : {1, 5, 50})
    EXPECT_GT(variance_closed_form(k, 1.0, 0.2, true), variance_closed_form(k, 1.0, 0.4, true));
}

TEST(Simulation, RejectsBadParameters) {
  NoiseModelParams p;
  p.p = 1.5;
  EXPECT_THROW(simulate_noise_chain(p), std::invalid_argument);
  p = {};
  p.depth = 0;
  EXPECT_THROW(simulate_noise_chain(p), std::invalid_argument);
  p = {};
  p.trials = 1;
  EXPECT_THROW(simulate_noise_chain(p), std::invalid_argument);
  p = {};
  p.sigma2 = -1;
  EXPECT_THROW(simulate_noise_chain(p), std::invalid_argument);
}

TEST(Simulation, CalibratedAgainstClosedForm) {
  for (auto dist : {NoiseDistribution::normal, NoiseDistribution::rademacher}) {
    NoiseModelParams params;
    params.distribution = dist;
    const auto r = simulate_noise_chain(params, 4);
    ASSERT_EQ(r.depths.size(), 50u);
    int within = 0, total = 0;
    for (const auto& d : r.depths) {
      for (const auto* m : {&d.routed, &d.standard}) {
        ++total;
        within += std::abs(m->empirical_var - m->closed_var) <= 4 * m->stderr_var;
        EXPECT_NEAR(m->mean, 0.0, 5 * m->stderr_mean);
      }
    }
    EXPECT_GE(within, static_cast<int>(std::ceil(0.99 * total))) << to_string(dist);
  }
}

TEST(Simulation, StandardGrowsLinearlyRoutedSaturates) {
  const auto r = simulate_noise_chain({}, 4);
  std::vector<double> k, standard, routed_tail, k_tail;
  for (const auto& d : r.depths) {
    k.push_back(d.depth);
    standard.push_back(d.standard.empirical_var);
    if (d.depth > 25) {
      k_tail.push_back(d.depth);
      routed_tail.push_back(d.routed.empirical_var);
    }
  }
  EXPECT_NEAR(least_squares_slope(k, standard), 1.0, 0.05);
  EXPECT_NEAR(least_squares_slope(k_tail, routed_tail), 0.0, 0.01);
  EXPECT_NEAR(r.depths.back().routed.empirical_var, 1.0, 4 * r.depths.back().routed.stderr_var);
}

TEST(Simulation, ZeroStopProbabilityMatchesStandard) {
  NoiseModelParams params;
  params.p = 0.0;
  params.depth = 20;
  const auto r = simulate_noise_chain(params);
  for (const auto& d : r.depths) {
    EXPECT_NEAR(d.routed.empirical_var, d.standard.closed_var, 3 * d.routed.stderr_var);
    EXPECT_EQ(d.routed.closed_var, d.standard.closed_var);
  }
}

TEST(Simulation, IndependentOfWorkerCount) {
  NoiseModelParams params;
  params.trials = 20000;
  params.depth = 10;
  const auto a = sim_result_csv(simulate_noise_chain(params, 1));
  EXPECT_EQ(a, sim_result_csv(simulate_noise_chain(params, 3)));
  EXPECT_EQ(a, sim_result_csv(simulate_noise_chain(params, 8)));
  params.seed = 43;
  EXPECT_NE(a, sim_result_csv(simulate_noise_chain(params, 1)));
}

TEST(Simulation, CsvLayout) {
  NoiseModelParams params;
  params.trials = 100;
  params.depth = 3;
  const auto csv = sim_result_csv(simulate_noise_chain(params));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "depth,model,empirical_var,closed_var,stderr");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_NE(csv.find("\n1,routed,"), std::string::npos);
  EXPECT_NE(csv.find("\n3,standard,"), std::string::npos);
}

TEST(Slope, ExactLine) {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  EXPECT_NEAR(least_squares_slope(x, y), 2.0, 1e-12);
}

TEST(Distribution, Names) {
  EXPECT_EQ(noise_distribution_from_string("rademacher"), NoiseDistribution::rademacher);
  EXPECT_EQ(to_string(NoiseDistribution::normal), "normal");
  EXPECT_THROW(noise_distribution_from_string("cauchy"), std::exception);
}

TEST(IdentityChain, SameDepthIsUnchanged) {
  const auto base = llm_chain(5);
  EXPECT_EQ(build_identity_chain(base, 5), base);
  EXPECT_THROW(build_identity_chain(base, 4), DepthTooSmall);
}

TEST(IdentityChain, PaddedChainIsValid) {
  const auto g = build_identity_chain(llm_chain(5), 10);
  ASSERT_EQ(g.components.size(), 10u);
  EXPECT_TRUE(validate_graph(g).ok()) << validate_graph(g).messages().front();
  int tools = 0;
  for (const auto& c : g.components) tools += c.is_tool;
  EXPECT_EQ(tools, 5);
  EXPECT_EQ(optimizable_ids(g).size(), 5u);
  EXPECT_EQ(g.components[0].id, "n1");
  EXPECT_EQ(g.components[1].id, "identity_1");
  EXPECT_EQ(g.components[6].id, "n2");
}

TEST(IdentityChain, ForwardPreservesAnswer) {
  const auto base = llm_chain(2);
  const auto deep = build_identity_chain(base, 20);
  ScriptedBackend a(echo_script()), b(echo_script());
  const auto shallow = run_forward(base, Context{{"question", "lookup paris"}}, a, {});
  const auto padded = run_forward(deep, Context{{"question", "lookup paris"}}, b, {});
  EXPECT_EQ(padded.final_context.at("f2"), shallow.final_context.at("f2"));
  EXPECT_EQ(padded.final_context.at("f2"), "lookup paris");
  EXPECT_EQ(a.calls(), b.calls());
}

TEST(Derangement, NoFixedPoints) {
  for (std::size_t n = 2; n <= 16; ++n)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto perm = random_derangement(n, seed);
      ASSERT_EQ(perm.size(), n);
      EXPECT_EQ(std::set<std::size_t>(perm.begin(), perm.end()).size(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NE(perm[i], i);
      EXPECT_EQ(perm, random_derangement(n, seed));
    }
  EXPECT_THROW(random_derangement(1, 0), std::invalid_argument);
}

TEST(Derangement, UniformOverDerangementsOfFour) {
  std::map<std::vector<std::size_t>, int> counts;
  const int n = 9000;
  for (int s = 0; s < n; ++s) ++counts[random_derangement(4, static_cast<std::uint64_t>(s))];
  ASSERT_EQ(counts.size(), 9u);
  for (const auto& [perm, c] : counts) {
    EXPECT_GT(c, 850);
    EXPECT_LT(c, 1150);
  }
}

TEST(Shuffle, RewritesDownstreamToDonor) {
  const auto g = llm_chain(3);
  const auto batch = echo_batch(g, {"a", "b", "c", "d"});
  const auto r = shuffle_intervention(batch, "n1", 7);
  ASSERT_EQ(r.batch.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& donor = batch[r.permutation[i]];
    ASSERT_NE(r.permutation[i], i);
    EXPECT_EQ(r.batch[i].find("n1")->output, donor.find("n1")->output);
    EXPECT_EQ(r.batch[i].find("n1")->input_slice, batch[i].find("n1")->input_slice);
    EXPECT_EQ(r.batch[i].find("n2")->input_slice.at("f1"), donor.find("n1")->output.at("f1"));
    EXPECT_EQ(r.batch[i].final_state.at("f1"), donor.final_state.at("f1"));
    EXPECT_EQ(r.batch[i].task_input, batch[i].task_input);
  }
  ASSERT_EQ(r.truth.size(), 4u);
  for (const auto& t : r.truth) {
    EXPECT_EQ(t.component, "n2");
    EXPECT_EQ(t.label, Attribution::upstream);
  }
}

TEST(Shuffle, Errors) {
  const auto g = llm_chain(2);
  const auto batch = echo_batch(g, {"a", "b"});
  EXPECT_THROW(shuffle_intervention({batch[0]}, "n1"), std::invalid_argument);
  EXPECT_THROW(shuffle_intervention(batch, "ghost"), NodeNotFound);
}

TEST(Accuracy, Scoring) {
  const std::vector<GroundTruth> truth{{0, "n2", Attribution::upstream}, {1, "n2", Attribution::upstream}};
  std::vector<RoutingRecord> records{{1, 0, "n2", false, true, 5}, {1, 1, "n2", true, true, 5},
                                     {1, 0, "n3", true, false, 5}};
  EXPECT_EQ(attribution_accuracy(records, truth), 1.0);
  records[1].upstream_feedback = false;
  EXPECT_EQ(attribution_accuracy(records, truth), 0.5);
}

TEST(Accuracy, Misaligned) {
  const std::vector<GroundTruth> truth{{0, "n2", Attribution::upstream}};
  EXPECT_THROW(attribution_accuracy({}, truth), MisalignedRecords);
  EXPECT_THROW(attribution_accuracy({{1, 0, "n2", false, true, 1}}, {}), MisalignedRecords);
  EXPECT_THROW(attribution_accuracy({{1, 0, "n2", false, true, 1}, {1, 0, "n2", false, true, 1}}, truth),
               MisalignedRecords);
}
