#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resgrad/backward.hpp"
#include "resgrad/forward.hpp"
#include "resgrad/graph.hpp"

namespace resgrad {

// ---------------------------------------------------------------------------
// Variance propagation along a feedback chain
//
// Standard chain:  N_k = N_{k-1} + δ_k
// Routed chain:    N_k = (1 - Z_k) (N_{k-1} + δ_k),   Z_k ~ Bernoulli(p)
// with N_0 = 0, E[δ_k] = 0 and Var(δ_k) = σ².

enum class NoiseDistribution { normal, rademacher };
std::string_view to_string(NoiseDistribution d) noexcept;
NoiseDistribution noise_distribution_from_string(std::string_view s);

struct NoiseModelParams {
  double sigma2 = 1.0;
  double p = 0.5;
  int depth = 50;
  std::int64_t trials = 50000;
  std::uint64_t seed = 42;
  NoiseDistribution distribution = NoiseDistribution::normal;
};

/// Standard: kσ². Routed: σ² Σ_{i=1..k} (1-p)^i.
double variance_closed_form(int k, double sigma2, double p, bool routed);
/// σ²(1-p)/p, the routed limit; +inf when p == 0.
double routed_variance_limit(double sigma2, double p);

struct ModelStats {
  double empirical_var = 0.0;
  double closed_var = 0.0;
  /// Standard error of empirical_var.
  double stderr_var = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;
};

struct DepthStats {
  int depth = 0;
  ModelStats routed;
  ModelStats standard;
};

struct SimResult {
  NoiseModelParams params;
  std::vector<DepthStats> depths;
};

/// Trials per independently seeded block. Blocks are merged in index
/// order, so the result does not depend on the number of workers.
inline constexpr std::int64_t kTrialsPerBlock = 4096;

/// Monte Carlo over `params.trials` chains; unbiased variance per depth.
SimResult simulate_noise_chain(const NoiseModelParams& params, int workers = 1);

/// depth,model,empirical_var,closed_var,stderr; one row per (depth, model).
std::string sim_result_csv(const SimResult& result);

double least_squares_slope(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Depth chains and the batch-shuffling harness

/// Inserts target_depth - |base| identity tool nodes right after the first
/// component, relaying its outputs to everything downstream. Throws
/// DepthTooSmall when target_depth < |base|.
Graph build_identity_chain(const Graph& base, int target_depth);

enum class Attribution { local, upstream };
std::string_view to_string(Attribution a) noexcept;

struct GroundTruth {
  int example = 0;
  std::string component;
  Attribution label = Attribution::upstream;
};

struct ShuffleResult {
  std::vector<Trajectory> batch;
  /// Trajectory i received node outputs from trajectory permutation[i].
  std::vector<std::size_t> permutation;
  std::vector<GroundTruth> truth;
};

/// Uniformly random fixed-point-free permutation of n >= 2 elements.
std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed);

/// Swaps `node_id`'s outputs across the batch with a derangement and
/// rewrites downstream input slices and final states to match. Every
/// consumer of the swapped fields is labelled an upstream fault.
ShuffleResult shuffle_intervention(const std::vector<Trajectory>& batch, const std::string& node_id,
                                   std::uint64_t seed = 42);

/// Fraction of truth entries whose routing class matches. Upstream feedback
/// classifies as upstream, anything else as local. Records with no truth
/// entry are ignored. Throws MisalignedRecords when a truth entry has no
/// record or a key is recorded twice.
double attribution_accuracy(const std::vector<RoutingRecord>& records, const std::vector<GroundTruth>& truth);

}  // namespace resgrad
