#include "resgrad/noise_sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "parallel.hpp"
#include "resgrad/scheduler.hpp"

namespace resgrad {

std::string_view to_string(NoiseDistribution d) noexcept {
  return d == NoiseDistribution::rademacher ? "rademacher" : "normal";
}

NoiseDistribution noise_distribution_from_string(std::string_view s) {
  if (s == "normal") return NoiseDistribution::normal;
  if (s == "rademacher") return NoiseDistribution::rademacher;
  throw Error("unknown noise distribution: " + std::string(s));
}

double variance_closed_form(int k, double sigma2, double p, bool routed) {
  if (k <= 0) return 0.0;
  if (!routed || p == 0.0) return static_cast<double>(k) * sigma2;
  if (p >= 1.0) return 0.0;
  // σ² q (1 - q^k) / (1 - q) with q = 1 - p, written to avoid cancellation.
  const double q = 1.0 - p;
  const double one_minus_qk = -std::expm1(static_cast<double>(k) * std::log1p(-p));
  return sigma2 * q * one_minus_qk / p;
}

double routed_variance_limit(double sigma2, double p) {
  if (p <= 0.0) return std::numeric_limits<double>::infinity();
  return sigma2 * (1.0 - p) / p;
}

namespace {

// Running central moments up to order four; mergeable (Pébay 2008).
struct Moments {
  double n = 0, mean = 0, m2 = 0, m3 = 0, m4 = 0;

  void add(double x) {
    const double n1 = n;
    n += 1;
    const double delta = x - mean;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean += delta_n;
    m4 += term1 * delta_n2 * (n * n - 3 * n + 3) + 6 * delta_n2 * m2 - 4 * delta_n * m3;
    m3 += term1 * delta_n * (n - 2) - 3 * delta_n * m2;
    m2 += term1;
  }

  void merge(const Moments& b) {
    if (b.n == 0) return;
    if (n == 0) {
      *this = b;
      return;
    }
    const double na = n, nb = b.n, nt = na + nb;
    const double d = b.mean - mean;
    const double d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
    const double m2t = m2 + b.m2 + d2 * na * nb / nt;
    const double m3t = m3 + b.m3 + d3 * na * nb * (na - nb) / (nt * nt) + 3 * d * (na * b.m2 - nb * m2) / nt;
    const double m4t = m4 + b.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (nt * nt * nt) +
                       6 * d2 * (na * na * b.m2 + nb * nb * m2) / (nt * nt) + 4 * d * (na * b.m3 - nb * m3) / nt;
    mean += d * nb / nt;
    n = nt;
    m2 = m2t;
    m3 = m3t;
    m4 = m4t;
  }

  double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }

  // Standard error of the unbiased variance estimator.
  double variance_stderr() const {
    if (n < 4) return 0.0;
    const double s2 = variance();
    const double mu4 = m4 / n;
    const double v = (mu4 - (n - 3) / (n - 1) * s2 * s2) / n;
    return v > 0 ? std::sqrt(v) : 0.0;
  }
};

struct BlockMoments {
  std::vector<Moments> routed;
  std::vector<Moments> standard;
};

BlockMoments run_block(const NoiseModelParams& params, std::int64_t block, std::int64_t trials) {
  BlockMoments out;
  out.routed.resize(static_cast<std::size_t>(params.depth));
  out.standard.resize(static_cast<std::size_t>(params.depth));
  std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, std::sqrt(params.sigma2));
  const double amplitude = std::sqrt(params.sigma2);

  for (std::int64_t t = 0; t < trials; ++t) {
    double routed = 0.0;
    double standard = 0.0;
    for (int k = 0; k < params.depth; ++k) {
      const double delta = params.distribution == NoiseDistribution::normal
                               ? normal(rng)
                               : ((rng() >> 63) ? amplitude : -amplitude);
      const bool filtered = uniform01(rng) < params.p;
      standard += delta;
      routed = filtered ? 0.0 : routed + delta;
      out.routed[static_cast<std::size_t>(k)].add(routed);
      out.standard[static_cast<std::size_t>(k)].add(standard);
    }
  }
  return out;
}

}  // namespace

SimResult simulate_noise_chain(const NoiseModelParams& params, int workers) {
  if (!(params.sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(params.p >= 0.0 && params.p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  if (params.depth < 1) throw std::invalid_argument("depth must be >= 1");
  if (params.trials < 2) throw std::invalid_argument("trials must be >= 2");

  const std::int64_t blocks = (params.trials + kTrialsPerBlock - 1) / kTrialsPerBlock;
  std::vector<BlockMoments> per_block(static_cast<std::size_t>(blocks));
  detail::parallel_for(per_block.size(), workers, [&](std::size_t b) {
    const auto start = static_cast<std::int64_t>(b) * kTrialsPerBlock;
    per_block[b] = run_block(params, static_cast<std::int64_t>(b), std::min(kTrialsPerBlock, params.trials - start));
  });

  SimResult result;
  result.params = params;
  for (int k = 0; k < params.depth; ++k) {
    Moments routed, standard;
    for (const auto& b : per_block) {
      routed.merge(b.routed[static_cast<std::size_t>(k)]);
      standard.merge(b.standard[static_cast<std::size_t>(k)]);
    }
    auto fill = [&](const Moments& m, bool is_routed) {
      ModelStats s;
      s.empirical_var = m.variance();
      s.closed_var = variance_closed_form(k + 1, params.sigma2, params.p, is_routed);
      s.stderr_var = m.variance_stderr();
      s.mean = m.mean;
      s.stderr_mean = std::sqrt(s.empirical_var / m.n);
      return s;
    };
    result.depths.push_back({k + 1, fill(routed, true), fill(standard, false)});
  }
  return result;
}

std::string sim_result_csv(const SimResult& result) {
  std::string out = "depth,model,empirical_var,closed_var,stderr\n";
  char line[256];
  for (const auto& d : result.depths) {
    for (const auto& [name, s] : {std::pair{"routed", &d.routed}, std::pair{"standard", &d.standard}}) {
      std::snprintf(line, sizeof line, "%d,%s,%.17g,%.17g,%.17g\n", d.depth, name, s->empirical_var, s->closed_var,
                    s->stderr_var);
      out += line;
    }
  }
  return out;
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs two or more paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------

Graph build_identity_chain(const Graph& base, int target_depth) {
  const auto size = static_cast<int>(base.components.size());
  if (size == 0 || target_depth < size)
    throw DepthTooSmall("target depth " + std::to_string(target_depth) + " is below the base size " +
                        std::to_string(size));
  if (target_depth == size) return base;

  std::set<std::string> taken(base.task_inputs.begin(), base.task_inputs.end());
  for (const auto& c : base.components) {
    taken.insert(c.input_fields.begin(), c.input_fields.end());
    taken.insert(c.output_fields.begin(), c.output_fields.end());
  }

  Graph out;
  out.task_inputs = base.task_inputs;
  out.components.push_back(base.components.front());
  const auto original = base.components.front().output_fields;
  auto relay = original;
  for (int i = 1; i <= target_depth - size; ++i) {
    ComponentSpec node;
    node.id = "identity_" + std::to_string(i);
    node.role_description = "Identity node: lossless copy of its input.";
    node.is_tool = true;
    node.input_fields = relay;
    for (const auto& f : relay) {
      const auto stem = f.substr(0, f.rfind("_id") == std::string::npos ? f.size() : f.rfind("_id"));
      std::string name = stem + "_id" + std::to_string(i);
      while (taken.count(name)) name += "_";
      taken.insert(name);
      node.output_fields.push_back(name);
    }
    relay = node.output_fields;
    out.components.push_back(std::move(node));
  }

  for (int i = 1; i < size; ++i) {
    auto c = base.components[static_cast<std::size_t>(i)];
    for (auto& f : c.input_fields) {
      auto it = std::find(original.begin(), original.end(), f);
      if (it != original.end()) f = relay[static_cast<std::size_t>(it - original.begin())];
    }
    out.components.push_back(std::move(c));
  }
  return out;
}

std::string_view to_string(Attribution a) noexcept {
  return a == Attribution::upstream ? "upstream" : "local";
}

std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("a derangement needs at least two elements");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(n);
  for (;;) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i) fixed = perm[i] == i;
    if (!fixed) return perm;
  }
}

ShuffleResult shuffle_intervention(const std::vector<Trajectory>& batch, const std::string& node_id,
                                   std::uint64_t seed) {
  if (batch.size() < 2) throw std::invalid_argument("shuffling needs a batch of at least two trajectories");
  for (const auto& t : batch)
    if (!t.find(node_id)) throw NodeNotFound(node_id);

  ShuffleResult result;
  result.permutation = random_derangement(batch.size(), seed);
  result.batch = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& donor = *batch[result.permutation[i]].find(node_id);
    auto& traj = result.batch[i];
    bool after = false;
    for (auto& entry : traj.entries) {
      if (entry.component_id == node_id) {
        entry.output = donor.output;
        after = true;
        continue;
      }
      if (!after) continue;
      bool consumes = false;
      for (const auto& [field, value] : donor.output) {
        if (entry.input_slice.contains(field)) {
          entry.input_slice.set(field, value);
          consumes = true;
        }
      }
      if (consumes) result.truth.push_back({static_cast<int>(i), entry.component_id, Attribution::upstream});
    }
    for (const auto& [field, value] : donor.output) traj.final_state.set(field, value);
  }
  return result;
}

double attribution_accuracy(const std::vector<RoutingRecord>& records, const std::vector<GroundTruth>& truth) {
  if (truth.empty()) throw MisalignedRecords("no ground truth to score against");
  std::map<std::pair<int, std::string>, Attribution> observed;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.example, r.component);
    const auto cls = r.upstream_feedback ? Attribution::upstream : Attribution::local;
    if (!observed.emplace(key, cls).second)
      throw MisalignedRecords("duplicate record for example " + std::to_string(r.example) + " at " + r.component);
  }
  std::size_t hits = 0;
  for (const auto& t : truth) {
    auto it = observed.find({t.example, t.component});
    if (it == observed.end())
      throw MisalignedRecords("no record for example " + std::to_string(t.example) + " at " + t.component);
    if (it->second == t.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace resgrad
