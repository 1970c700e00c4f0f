#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

namespace asl {

using NodeId = std::int32_t;

/// Directed social graph. Edge (u,v) means u influences v, i.e. v follows u,
/// so out_degree(u) is u's follower count.
class SocialGraph {
public:
  SocialGraph() = default;
  explicit SocialGraph(NodeId n_nodes) : out_adj_(n_nodes), in_deg_(n_nodes, 0) {}

  // Drops self-loops and duplicate edges; adjacency lists end up sorted.
  static SocialGraph from_edges(NodeId n_nodes,
                                std::vector<std::pair<NodeId, NodeId>> edges);

  NodeId n_nodes() const { return static_cast<NodeId>(out_adj_.size()); }
  std::size_t n_edges() const { return n_edges_; }

  const std::vector<NodeId>& out_neighbors(NodeId u) const { return out_adj_[u]; }
  NodeId out_degree(NodeId u) const { return static_cast<NodeId>(out_adj_[u].size()); }
  NodeId in_degree(NodeId u) const { return in_deg_[u]; }
  bool has_edge(NodeId u, NodeId v) const;

  std::vector<std::pair<NodeId, NodeId>> edge_list() const;

private:
  std::vector<std::vector<NodeId>> out_adj_;
  std::vector<NodeId> in_deg_;
  std::size_t n_edges_ = 0;
};

struct CommunityConfig {
  std::vector<NodeId> community_sizes;
  double p_intra = 0.9;
  double p_inter = 0.01;
  std::uint64_t rng_seed = 0;

  NodeId total_nodes() const;
  void validate() const;  // throws std::invalid_argument
};

/// Star-community generator: one hub per community; hub->member edges with
/// probability p_intra, member->member with p_intra/10, cross-community
/// ordered pairs with p_inter. Deterministic given rng_seed.
SocialGraph generate_synthetic(const CommunityConfig& cfg);

struct EdgeListResult {
  SocialGraph graph;
  std::vector<std::int64_t> original_ids;  // dense id -> original id
  std::size_t self_loops_dropped = 0;
};

/// Parses "u v" pairs, one per line, '#' comments allowed. Node ids are
/// re-indexed densely in order of first appearance.
EdgeListResult load_edge_list(std::istream& in);

void save_edge_list(const SocialGraph& g, std::ostream& out);

}  // namespace asl
