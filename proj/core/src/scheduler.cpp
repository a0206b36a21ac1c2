#include "resgrad/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace resgrad {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::density_boltzmann: return "density_boltzmann";
    case Strategy::random: return "random";
    case Strategy::round_robin: return "round_robin";
    case Strategy::greedy: return "greedy";
  }
  return "density_boltzmann";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "density_boltzmann") return Strategy::density_boltzmann;
  if (s == "random") return Strategy::random;
  if (s == "round_robin") return Strategy::round_robin;
  if (s == "greedy") return Strategy::greedy;
  throw Error("unknown scheduler strategy: " + std::string(s));
}

std::vector<double> boltzmann_probabilities(std::span<const double> rho, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (rho.empty()) return {};
  const double max = *std::max_element(rho.begin(), rho.end());
  std::vector<double> p(rho.size());
  double total = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    p[i] = std::exp((rho[i] - max) / tau);
    total += p[i];
  }
  for (auto& x : p) x /= total;
  return p;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index over an empty range");
  const std::uint64_t bound = n;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::size_t sample_index(std::span<const double> probabilities, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities[i];
    if (u < cumulative) return i;
  }
  // Rounding left the total just under 1; take the last non-zero entry.
  for (std::size_t i = probabilities.size(); i-- > 0;)
    if (probabilities[i] > 0.0) return i;
  return probabilities.size() - 1;
}

std::string boltzmann_select(const DensityTable& densities, const std::vector<std::string>& candidates, double tau,
                             std::mt19937_64& rng) {
  if (candidates.empty()) throw NoOptimizableComponents();
  std::vector<double> rho;
  rho.reserve(candidates.size());
  for (const auto& id : candidates) rho.push_back(static_cast<double>(densities.rho(id)));
  const auto p = boltzmann_probabilities(rho, tau);
  return candidates[sample_index(p, rng)];
}

std::string select_component(SchedulerState& state, const DensityTable& densities,
                             const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw NoOptimizableComponents();
  switch (state.strategy) {
    case Strategy::random:
      return candidates[uniform_index(state.rng, candidates.size())];
    case Strategy::round_robin: {
      state.round_robin_cursor %= candidates.size();
      const auto& id = candidates[state.round_robin_cursor];
      state.round_robin_cursor = (state.round_robin_cursor + 1) % candidates.size();
      return id;
    }
    case Strategy::greedy: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < candidates.size(); ++i)
        if (densities.rho(candidates[i]) > densities.rho(candidates[best])) best = i;
      return candidates[best];
    }
    case Strategy::density_boltzmann:
      return boltzmann_select(densities, candidates, state.tau, state.rng);
  }
  throw Error("unreachable strategy");
}

}  // namespace resgrad
