#include "asl/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "asl/diffusion.hpp"

namespace asl {

double ExactEstimator::evaluate(const SocialGraph& g, std::span<const NodeId> seeds, double p) {
  ++evaluations_;
  return exact_spread(g, seeds, p);
}

double MonteCarloEstimator::evaluate(const SocialGraph& g, std::span<const NodeId> seeds,
                                     double p) {
  ++evaluations_;
  return live_edge_spread(g, seeds, p, n_sims_, rng_seed_);
}

Selector::Selector(SelectorKind kind, const SocialGraph& g, double p, SpreadEstimator* estimator)
    : kind_(kind), g_(&g), p_(p), estimator_(estimator) {
  if (kind != SelectorKind::Degree && !estimator_)
    throw std::invalid_argument("selector: estimator required for CELF/Greedy");
}

NodeId Selector::next_node(std::span<const std::uint8_t> mask) {
  bool any = false;
  for (NodeId u = 0; u < g_->n_nodes(); ++u)
    if (mask[u]) {
      any = true;
      break;
    }
  if (!any) throw std::invalid_argument("selector: empty candidate set");

  NodeId picked;
  switch (kind_) {
    case SelectorKind::Degree: picked = next_degree(mask); break;
    case SelectorKind::Celf: picked = next_celf(mask); break;
    case SelectorKind::Greedy: picked = next_greedy(mask); break;
    default: throw std::logic_error("unknown selector kind");
  }
  chosen_.push_back(picked);
  ++round_;
  return picked;
}

NodeId Selector::next_degree(std::span<const std::uint8_t> mask) const {
  NodeId best = -1;
  for (NodeId u = 0; u < g_->n_nodes(); ++u) {
    if (!mask[u]) continue;
    if (best < 0 || g_->out_degree(u) > g_->out_degree(best)) best = u;
  }
  return best;
}

namespace {

// max-heap: highest gain first, smallest node id breaking ties
struct CelfLess {
  bool operator()(const auto& a, const auto& b) const {
    if (a.gain != b.gain) return a.gain < b.gain;
    return a.node > b.node;
  }
};

}  // namespace

NodeId Selector::next_celf(std::span<const std::uint8_t> mask) {
  // Sigma of the already-chosen set is tracked via the picked entry's sigma,
  // so no extra evaluation of the base set is ever needed. Stale gains are
  // upper bounds in exact arithmetic but can sit a few ulps below a fresh
  // tie; any stale rival within kTieEps of the fresh maximum is refreshed
  // before committing, and exact ties among fresh entries are broken on the
  // raw spread value then smallest id, matching the exhaustive greedy rule.
  constexpr double kTieEps = 1e-9;
  const double sigma_base = sigma_chosen_;
  std::vector<NodeId> with(chosen_);
  with.push_back(0);
  auto refresh = [&](CelfEntry& e) {
    with.back() = e.node;
    e.sigma = estimator_->evaluate(*g_, with, p_);
    e.gain = e.sigma - sigma_base;
    e.round = round_;
  };

  if (!queue_initialized_) {
    for (NodeId u = 0; u < g_->n_nodes(); ++u) {
      if (!mask[u]) continue;
      CelfEntry e{0.0, 0.0, u, round_};
      refresh(e);
      queue_.push_back(e);
      std::push_heap(queue_.begin(), queue_.end(), CelfLess{});
    }
    queue_initialized_ = true;
  }

  while (!queue_.empty()) {
    std::pop_heap(queue_.begin(), queue_.end(), CelfLess{});
    CelfEntry top = queue_.back();
    queue_.pop_back();
    if (!mask[top.node]) continue;  // acquired elsewhere; masks only shrink
    if (top.round != round_) {
      refresh(top);
      queue_.push_back(top);
      std::push_heap(queue_.begin(), queue_.end(), CelfLess{});
      continue;
    }
    bool refreshed_rival = false;
    for (CelfEntry& e : queue_)
      if (mask[e.node] && e.round != round_ && e.gain >= top.gain - kTieEps) {
        refresh(e);
        refreshed_rival = true;
      }
    if (refreshed_rival) {
      queue_.push_back(top);
      std::make_heap(queue_.begin(), queue_.end(), CelfLess{});
      continue;
    }
    // every candidate that could still win is fresh; apply the greedy rule
    std::size_t best = queue_.size();  // sentinel meaning "top"
    CelfEntry picked = top;
    for (std::size_t i = 0; i < queue_.size(); ++i) {
      const CelfEntry& e = queue_[i];
      if (!mask[e.node] || e.round != round_ || e.gain < top.gain - kTieEps) continue;
      if (e.sigma > picked.sigma || (e.sigma == picked.sigma && e.node < picked.node)) {
        best = i;
        picked = e;
      }
    }
    if (best != queue_.size()) {
      queue_[best] = top;
      std::make_heap(queue_.begin(), queue_.end(), CelfLess{});
    }
    sigma_chosen_ = picked.sigma;
    return picked.node;
  }
  throw std::logic_error("celf: queue exhausted with valid candidates remaining");
}

NodeId Selector::next_greedy(std::span<const std::uint8_t> mask) {
  NodeId best = -1;
  double best_sigma = 0.0;
  std::vector<NodeId> with(chosen_);
  with.push_back(0);
  for (NodeId u = 0; u < g_->n_nodes(); ++u) {
    if (!mask[u]) continue;
    with.back() = u;
    double sigma = estimator_->evaluate(*g_, with, p_);
    if (best < 0 || sigma > best_sigma) {
      best = u;
      best_sigma = sigma;
    }
  }
  return best;
}

std::vector<NodeId> greedy_select(const SocialGraph& g, double p, int budget,
                                  SpreadEstimator& estimator) {
  if (budget > g.n_nodes()) throw std::invalid_argument("greedy_select: budget exceeds |V|");
  Selector sel(SelectorKind::Greedy, g, p, &estimator);
  std::vector<std::uint8_t> mask(g.n_nodes(), 1);
  std::vector<NodeId> out;
  for (int i = 0; i < budget; ++i) {
    NodeId u = sel.next_node(mask);
    mask[u] = 0;
    out.push_back(u);
  }
  return out;
}

ActivityAgent ActivityAgent::scripted(ActivityKind fixed_kind) {
  ActivityAgent a;
  a.choose = [fixed_kind](const ObservationI&, std::mt19937_64&) { return fixed_kind; };
  return a;
}

ActivityAgent ActivityAgent::scripted_mix(std::vector<std::pair<ActivityKind, double>> weights) {
  double total = 0.0;
  for (auto& [k, w] : weights) total += w;
  if (total <= 0.0) throw std::invalid_argument("scripted_mix: weights must be positive");
  ActivityAgent a;
  a.choose = [weights, total](const ObservationI&, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, total);
    double r = u01(rng);
    for (auto& [k, w] : weights) {
      r -= w;
      if (r < 0.0) return k;
    }
    return weights.back().first;
  };
  return a;
}

ActivityAgent ActivityAgent::learned(Pi1Net& pi1, NodeId n_nodes) {
  ActivityAgent a;
  a.choose = [&pi1, n_nodes](const ObservationI& obs, std::mt19937_64& rng) {
    auto logits = pi1.forward(pi1_features(obs, n_nodes));
    auto probs = nn::masked_softmax(logits, {});
    return static_cast<ActivityKind>(nn::categorical_sample(probs, rng));
  };
  return a;
}

EpisodeRecord run_baseline_episode(Env& env, const ActivityAgent& agent, Selector& selector,
                                   std::mt19937_64& rng) {
  while (!env.terminated()) {
    ActivityKind kind = agent.choose(env.observe_i(), rng);
    StepOutcome out = env.step_activity(kind);
    if (out.follower_phase_requested) {
      ObservationII obs = env.observe_ii();
      NodeId node = selector.next_node(obs.mask);
      env.step_follower(node);
    }
  }
  return make_episode_record(env);
}

EpisodeRecord run_policy_episode(Env& env, PolicyBundle& bundle, std::mt19937_64& rng) {
  const NodeId n = env.graph().n_nodes();
  while (!env.terminated()) {
    auto logits = bundle.pi1.forward(pi1_features(env.observe_i(), n));
    auto probs = nn::masked_softmax(logits, {});
    int action = nn::categorical_sample(probs, rng);
    StepOutcome out = env.step_activity(static_cast<ActivityKind>(action));
    if (out.follower_phase_requested) {
      ObservationII obs = env.observe_ii();
      auto logits2 = bundle.pi2.forward(pi2_node_features(obs), obs.activity);
      auto probs2 = nn::masked_softmax(logits2, obs.mask);
      NodeId node = static_cast<NodeId>(nn::categorical_sample(probs2, rng));
      env.step_follower(node);
    }
  }
  return make_episode_record(env);
}

}  // namespace asl
