#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "asl/env.hpp"
#include "asl/policy.hpp"

namespace asl {

/// sigma-hat(S) used by greedy-style selectors; implementations count their
/// own invocations so CELF's laziness is checkable.
class SpreadEstimator {
public:
  virtual ~SpreadEstimator() = default;
  virtual double evaluate(const SocialGraph& g, std::span<const NodeId> seeds, double p) = 0;
  long evaluations() const { return evaluations_; }

protected:
  long evaluations_ = 0;
};

class ExactEstimator : public SpreadEstimator {
public:
  double evaluate(const SocialGraph& g, std::span<const NodeId> seeds, double p) override;
};

class MonteCarloEstimator : public SpreadEstimator {
public:
  explicit MonteCarloEstimator(int n_sims = 1000, std::uint64_t rng_seed = 0)
      : n_sims_(n_sims), rng_seed_(rng_seed) {}
  double evaluate(const SocialGraph& g, std::span<const NodeId> seeds, double p) override;

private:
  int n_sims_;
  std::uint64_t rng_seed_;
};

enum class SelectorKind { Degree, Celf, Greedy };

/// Stateful per-episode node selector with the shared smallest-id tie rule.
class Selector {
public:
  Selector(SelectorKind kind, const SocialGraph& g, double p, SpreadEstimator* estimator);

  /// Next node among mask-valid candidates; updates internal chosen set.
  NodeId next_node(std::span<const std::uint8_t> mask);

  SelectorKind kind() const { return kind_; }
  const std::vector<NodeId>& chosen() const { return chosen_; }

private:
  NodeId next_degree(std::span<const std::uint8_t> mask) const;
  NodeId next_celf(std::span<const std::uint8_t> mask);
  NodeId next_greedy(std::span<const std::uint8_t> mask);

  struct CelfEntry {
    double gain;
    double sigma;  // spread of chosen set plus this node, as of `round`
    NodeId node;
    long round;
  };

  SelectorKind kind_;
  const SocialGraph* g_;
  double p_;
  SpreadEstimator* estimator_;
  std::vector<NodeId> chosen_;
  std::vector<CelfEntry> queue_;  // max-heap by (gain, then smaller id)
  bool queue_initialized_ = false;
  double sigma_chosen_ = 0.0;  // running spread of chosen_, updated as picks are made
  long round_ = 0;
};

/// Repeated argmax of marginal gain; the oracle CELF is checked against.
std::vector<NodeId> greedy_select(const SocialGraph& g, double p, int budget,
                                  SpreadEstimator& estimator);

/// How the first-level agent is driven in a baseline episode.
struct ActivityAgent {
  // returns the activity kind for the current ObservationI
  std::function<ActivityKind(const ObservationI&, std::mt19937_64&)> choose;

  static ActivityAgent scripted(ActivityKind fixed_kind);
  static ActivityAgent scripted_mix(std::vector<std::pair<ActivityKind, double>> weights);
  static ActivityAgent learned(Pi1Net& pi1, NodeId n_nodes);
};

EpisodeRecord run_baseline_episode(Env& env, const ActivityAgent& agent, Selector& selector,
                                   std::mt19937_64& rng);

/// ACORN inference: both learned policies drive the environment.
EpisodeRecord run_policy_episode(Env& env, PolicyBundle& bundle, std::mt19937_64& rng);

}  // namespace asl
