#include "asl/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asl {

namespace {

void check_seeds(const SocialGraph& g, std::span<const NodeId> seeds) {
  for (NodeId s : seeds)
    if (s < 0 || s >= g.n_nodes()) throw std::out_of_range("seed node id out of range");
}

// Counter-based per-edge uniform in [0,1); the same (seed, sim, u, v) always
// yields the same draw, which is what gives marginal_gain its common random
// numbers.
double edge_u01(std::uint64_t seed, std::uint64_t sim, NodeId u, NodeId v) {
  std::uint64_t x = seed;
  x ^= 0x9e3779b97f4a7c15ULL + sim + (x << 6) + (x >> 2);
  x ^= 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(u) + (x << 6) + (x >> 2);
  x ^= 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(v) + (x << 6) + (x >> 2);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace

CascadeResult simulate_cascade(const SocialGraph& g, std::span<const NodeId> seeds,
                               double p, std::mt19937_64& rng) {
  check_seeds(g, seeds);
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("activation probability out of [0,1]");

  std::vector<char> active(g.n_nodes(), 0);
  std::vector<NodeId> frontier(seeds.begin(), seeds.end());
  std::sort(frontier.begin(), frontier.end());
  frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
  for (NodeId s : frontier) active[s] = 1;

  CascadeResult res;
  res.activated = frontier;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<NodeId> next;
  while (!frontier.empty()) {
    next.clear();
    for (NodeId u : frontier) {
      for (NodeId v : g.out_neighbors(u)) {
        if (active[v]) continue;
        if (u01(rng) < p) {
          active[v] = 1;
          next.push_back(v);
        }
      }
    }
    std::sort(next.begin(), next.end());
    res.activated.insert(res.activated.end(), next.begin(), next.end());
    frontier = next;
  }
  std::sort(res.activated.begin(), res.activated.end());
  res.count = res.activated.size();
  return res;
}

SpreadEstimate spread(const SocialGraph& g, std::span<const NodeId> seeds, double p,
                      int n_sims, std::uint64_t rng_seed) {
  if (n_sims < 1) throw std::invalid_argument("spread: n_sims must be >= 1");
  check_seeds(g, seeds);
  if (seeds.empty()) return {0.0, 0.0, n_sims};

  std::mt19937_64 rng(rng_seed);
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n_sims; ++i) {
    double c = static_cast<double>(simulate_cascade(g, seeds, p, rng).count);
    sum += c;
    sumsq += c * c;
  }
  SpreadEstimate est;
  est.n_sims = n_sims;
  est.mean = sum / n_sims;
  if (n_sims > 1) {
    double var = std::max(0.0, (sumsq - sum * sum / n_sims) / (n_sims - 1));
    est.std_err = std::sqrt(var / n_sims);
  }
  return est;
}

namespace {

struct ExactState {
  const SocialGraph* g;
  double p;
  std::vector<char> active;
  std::vector<std::pair<NodeId, NodeId>> pending;
  int n_active = 0;

  double rec(std::size_t pos) {
    while (pos < pending.size() && active[pending[pos].second]) ++pos;
    if (pos == pending.size()) return n_active;
    NodeId v = pending[pos].second;

    double fail = (1.0 - p) * (1.0 - p > 0.0 ? rec(pos + 1) : 0.0);

    double succ = 0.0;
    if (p > 0.0) {
      active[v] = 1;
      ++n_active;
      std::size_t old_size = pending.size();
      for (NodeId w : g->out_neighbors(v)) pending.emplace_back(v, w);
      succ = p * rec(pos + 1);
      pending.resize(old_size);
      --n_active;
      active[v] = 0;
    }
    return fail + succ;
  }
};

}  // namespace

double exact_spread(const SocialGraph& g, std::span<const NodeId> seeds, double p) {
  if (g.n_edges() > kExactSpreadMaxEdges)
    throw std::invalid_argument("exact_spread: graph too large for enumeration (|E| > 25)");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("activation probability out of [0,1]");
  check_seeds(g, seeds);

  ExactState st;
  st.g = &g;
  st.p = p;
  st.active.assign(g.n_nodes(), 0);
  for (NodeId s : seeds) {
    if (!st.active[s]) {
      st.active[s] = 1;
      ++st.n_active;
    }
  }
  for (NodeId s : seeds)
    for (NodeId w : g.out_neighbors(s)) st.pending.emplace_back(s, w);
  return st.rec(0);
}

namespace {

// Reachable set over the live edges of one sampled world; newly reached nodes
// are marked in `reached` and counted.
int live_reach(const SocialGraph& g, std::span<const NodeId> starts, double p,
               std::uint64_t seed, std::uint64_t sim, std::vector<char>& reached) {
  int added = 0;
  std::vector<NodeId> stack;
  for (NodeId s : starts) {
    if (reached[s]) continue;
    reached[s] = 1;
    ++added;
    stack.push_back(s);
  }
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v : g.out_neighbors(u)) {
      if (reached[v]) continue;
      if (edge_u01(seed, sim, u, v) < p) {
        reached[v] = 1;
        ++added;
        stack.push_back(v);
      }
    }
  }
  return added;
}

}  // namespace

double live_edge_spread(const SocialGraph& g, std::span<const NodeId> seeds, double p,
                        int n_sims, std::uint64_t rng_seed) {
  if (n_sims < 1) throw std::invalid_argument("live_edge_spread: n_sims must be >= 1");
  check_seeds(g, seeds);
  if (seeds.empty()) return 0.0;
  std::vector<char> reached(g.n_nodes(), 0);
  double total = 0.0;
  for (int i = 0; i < n_sims; ++i) {
    std::fill(reached.begin(), reached.end(), 0);
    total += live_reach(g, seeds, p, rng_seed, static_cast<std::uint64_t>(i), reached);
  }
  return total / n_sims;
}

double marginal_gain(const SocialGraph& g, std::span<const NodeId> base, NodeId candidate,
                     double p, int n_sims, std::uint64_t rng_seed) {
  if (n_sims < 1) throw std::invalid_argument("marginal_gain: n_sims must be >= 1");
  check_seeds(g, base);
  if (candidate < 0 || candidate >= g.n_nodes())
    throw std::out_of_range("candidate node id out of range");
  for (NodeId b : base)
    if (b == candidate) throw std::invalid_argument("marginal_gain: candidate already in base");

  const NodeId cand[1] = {candidate};
  std::vector<char> reached(g.n_nodes(), 0);
  double total = 0.0;
  for (int i = 0; i < n_sims; ++i) {
    std::fill(reached.begin(), reached.end(), 0);
    live_reach(g, base, p, rng_seed, static_cast<std::uint64_t>(i), reached);
    total += live_reach(g, cand, p, rng_seed, static_cast<std::uint64_t>(i), reached);
  }
  return total / n_sims;
}

}  // namespace asl
