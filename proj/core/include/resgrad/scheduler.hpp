#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resgrad/backward.hpp"

namespace resgrad {

enum class Strategy { density_boltzmann, random, round_robin, greedy };
std::string_view to_string(Strategy s) noexcept;
/// Throws Error for names outside the enumeration.
Strategy strategy_from_string(std::string_view s);

/// exp(ρ_k/τ) / Σ_j exp(ρ_j/τ), evaluated with the maximum subtracted.
std::vector<double> boltzmann_probabilities(std::span<const double> rho, double tau);

/// Inverse-CDF draw from `probabilities` with a uniform in [0, 1).
std::size_t sample_index(std::span<const double> probabilities, std::mt19937_64& rng);

/// Uniform double in [0, 1) from 53 random bits.
double uniform01(std::mt19937_64& rng);
/// Uniform integer in [0, n) without modulo bias.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// Boltzmann draw over `candidates` (the optimizable components).
/// Throws NoOptimizableComponents when `candidates` is empty.
std::string boltzmann_select(const DensityTable& densities, const std::vector<std::string>& candidates, double tau,
                             std::mt19937_64& rng);

struct SchedulerState {
  Strategy strategy = Strategy::density_boltzmann;
  double tau = 1.0;
  std::size_t round_robin_cursor = 0;
  std::uint64_t rng_seed = 42;
  std::mt19937_64 rng{42};

  SchedulerState() = default;
  SchedulerState(Strategy s, double t, std::uint64_t seed) : strategy(s), tau(t), rng_seed(seed), rng(seed) {}
};

/// random: uniform; round_robin: cursor node, then advance; greedy: argmax ρ
/// with the lowest index winning ties; density_boltzmann: boltzmann_select.
std::string select_component(SchedulerState& state, const DensityTable& densities,
                             const std::vector<std::string>& candidates);

}  // namespace resgrad
