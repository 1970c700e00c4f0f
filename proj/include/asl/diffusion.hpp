#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "asl/graph.hpp"

namespace asl {

struct CascadeResult {
  std::vector<NodeId> activated;  // sorted
  std::size_t count = 0;
};

struct SpreadEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  int n_sims = 0;
};

/// One ICM cascade: every newly activated node attempts each inactive
/// out-neighbor exactly once with probability p, in ascending node-id order.
CascadeResult simulate_cascade(const SocialGraph& g, std::span<const NodeId> seeds,
                               double p, std::mt19937_64& rng);

/// Monte-Carlo estimate of sigma(S, G).
SpreadEstimate spread(const SocialGraph& g, std::span<const NodeId> seeds, double p,
                      int n_sims, std::uint64_t rng_seed);

/// Exact expected spread by conditioning on each activation attempt.
/// Only for tiny graphs (|E| <= 25).
double exact_spread(const SocialGraph& g, std::span<const NodeId> seeds, double p);

constexpr std::size_t kExactSpreadMaxEdges = 25;

/// spread(base + candidate) - spread(base), estimated with common random
/// numbers: both sides are evaluated in the same sampled live-edge worlds.
double marginal_gain(const SocialGraph& g, std::span<const NodeId> base, NodeId candidate,
                     double p, int n_sims, std::uint64_t rng_seed);

/// Mean reachable-set size over sampled live-edge worlds. Edge draws are
/// keyed by (rng_seed, sim, edge), so calls sharing a seed see the same
/// worlds -- the common-random-number estimator behind CELF and
/// marginal_gain.
double live_edge_spread(const SocialGraph& g, std::span<const NodeId> seeds, double p,
                        int n_sims, std::uint64_t rng_seed);

}  // namespace asl
