#include "asl/graph.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace asl {

SocialGraph SocialGraph::from_edges(NodeId n_nodes,
                                    std::vector<std::pair<NodeId, NodeId>> edges) {
  SocialGraph g(n_nodes);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes)
      throw std::out_of_range("edge endpoint out of range");
    g.out_adj_[u].push_back(v);
    g.in_deg_[v]++;
    g.n_edges_++;
  }
  return g;
}

bool SocialGraph::has_edge(NodeId u, NodeId v) const {
  const auto& adj = out_adj_[u];
  return std::binary_search(adj.begin(), adj.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> SocialGraph::edge_list() const {
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(n_edges_);
  for (NodeId u = 0; u < n_nodes(); ++u)
    for (NodeId v : out_adj_[u]) edges.emplace_back(u, v);
  return edges;
}

NodeId CommunityConfig::total_nodes() const {
  return std::accumulate(community_sizes.begin(), community_sizes.end(), NodeId{0});
}

void CommunityConfig::validate() const {
  if (community_sizes.empty() || total_nodes() <= 0)
    throw std::invalid_argument("community config: total size must be > 0");
  for (NodeId s : community_sizes)
    if (s <= 0) throw std::invalid_argument("community config: each community size must be > 0");
  if (p_intra < 0.0 || p_intra > 1.0 || p_inter < 0.0 || p_inter > 1.0)
    throw std::invalid_argument("community config: probabilities must lie in [0,1]");
  if (p_inter > p_intra)
    throw std::invalid_argument("community config: requires p_inter <= p_intra");
}

SocialGraph generate_synthetic(const CommunityConfig& cfg) {
  cfg.validate();
  const NodeId n = cfg.total_nodes();
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // community id per node; hub is the first node of each community block
  std::vector<int> community(n);
  std::vector<NodeId> hub(cfg.community_sizes.size());
  NodeId base = 0;
  for (std::size_t c = 0; c < cfg.community_sizes.size(); ++c) {
    hub[c] = base;
    for (NodeId i = 0; i < cfg.community_sizes[c]; ++i) community[base + i] = static_cast<int>(c);
    base += cfg.community_sizes[c];
  }

  std::vector<std::pair<NodeId, NodeId>> edges;
  base = 0;
  const double p_member = cfg.p_intra / 10.0;
  for (std::size_t c = 0; c < cfg.community_sizes.size(); ++c) {
    const NodeId size = cfg.community_sizes[c];
    const NodeId h = hub[c];
    for (NodeId i = 1; i < size; ++i)
      if (u01(rng) < cfg.p_intra) edges.emplace_back(h, base + i);
    for (NodeId i = 1; i < size; ++i)
      for (NodeId j = 1; j < size; ++j)
        if (i != j && u01(rng) < p_member) edges.emplace_back(base + i, base + j);
    base += size;
  }
  if (cfg.p_inter > 0.0) {
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = 0; v < n; ++v)
        if (u != v && community[u] != community[v] && u01(rng) < cfg.p_inter)
          edges.emplace_back(u, v);
  }
  return SocialGraph::from_edges(n, std::move(edges));
}

EdgeListResult load_edge_list(std::istream& in) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<std::int64_t> original_ids;
  std::unordered_map<std::int64_t, NodeId> dense;
  std::size_t self_loops = 0;

  auto intern = [&](std::int64_t id) {
    auto it = dense.find(id);
    if (it != dense.end()) return it->second;
    NodeId d = static_cast<NodeId>(original_ids.size());
    dense.emplace(id, d);
    original_ids.push_back(id);
    return d;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::int64_t u, v;
    if (!(ls >> u)) {
      // blank or comment-only line
      std::string rest;
      if (ls.clear(), std::istringstream(line) >> rest)
        throw std::runtime_error("edge list parse error at line " + std::to_string(line_no));
      continue;
    }
    if (!(ls >> v))
      throw std::runtime_error("edge list parse error at line " + std::to_string(line_no));
    std::string trailing;
    if (ls >> trailing)
      throw std::runtime_error("edge list parse error at line " + std::to_string(line_no) +
                               ": trailing tokens");
    if (u == v) {
      ++self_loops;
      intern(u);
      continue;
    }
    NodeId du = intern(u);
    NodeId dv = intern(v);
    edges.emplace_back(du, dv);
  }

  EdgeListResult res;
  res.graph = SocialGraph::from_edges(static_cast<NodeId>(original_ids.size()), std::move(edges));
  res.original_ids = std::move(original_ids);
  res.self_loops_dropped = self_loops;
  return res;
}

void save_edge_list(const SocialGraph& g, std::ostream& out) {
  out << "# nodes " << g.n_nodes() << " edges " << g.n_edges() << "\n";
  for (NodeId u = 0; u < g.n_nodes(); ++u)
    for (NodeId v : g.out_neighbors(u)) out << u << " " << v << "\n";
}

}  // namespace asl
