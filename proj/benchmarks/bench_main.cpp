#include <benchmark/benchmark.h>

#include <random>

#include "resgrad/backward.hpp"
#include "resgrad/context.hpp"
#include "resgrad/noise_sim.hpp"
#include "resgrad/scheduler.hpp"

namespace {

void BM_NoiseChain(benchmark::State& state) {
  resgrad::NoiseModelParams p;
  p.trials = state.range(0);
  p.depth = 50;
  for (auto _ : state) benchmark::DoNotOptimize(resgrad::simulate_noise_chain(p, 1));
  state.SetItemsProcessed(state.iterations() * p.trials * p.depth);
}
BENCHMARK(BM_NoiseChain)->Arg(4096)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_NoiseChainParallel(benchmark::State& state) {
  resgrad::NoiseModelParams p;
  for (auto _ : state) benchmark::DoNotOptimize(resgrad::simulate_noise_chain(p, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_NoiseChainParallel)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Boltzmann(benchmark::State& state) {
  std::vector<double> rho(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(1);
  for (auto& r : rho) r = static_cast<double>(rng() % 20);
  for (auto _ : state) {
    const auto p = resgrad::boltzmann_probabilities(rho, 1.0);
    benchmark::DoNotOptimize(resgrad::sample_index(p, rng));
  }
}
BENCHMARK(BM_Boltzmann)->Arg(4)->Arg(64);

void BM_ParseRouted(benchmark::State& state) {
  std::string text = "**LOCAL:**\n";
  for (int i = 0; i < state.range(0); ++i) text += "The component ignored the required output format.\n";
  text += "**UPSTREAM:**\nThe retrieved evidence does not mention the entity.\n";
  for (auto _ : state) benchmark::DoNotOptimize(resgrad::parse_routed(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseRouted)->Arg(1)->Arg(100);

void BM_Merge(benchmark::State& state) {
  resgrad::Context base;
  for (int i = 0; i < state.range(0); ++i) base.set("field_" + std::to_string(i), std::string(64, 'x'));
  const resgrad::Context delta{{"answer", "value"}, {"field_0", "replaced"}};
  for (auto _ : state) benchmark::DoNotOptimize(resgrad::merge_outputs(base, delta));
}
BENCHMARK(BM_Merge)->Arg(8)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
