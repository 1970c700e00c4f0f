#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "asl/graph.hpp"

namespace asl {

/// Row-major dense embedding, one length-k row per node.
struct EmbeddingMatrix {
  NodeId n_nodes = 0;
  int k = 0;
  std::vector<double> data;  // n_nodes * k

  std::span<const double> row(NodeId u) const {
    return {data.data() + static_cast<std::size_t>(u) * k, static_cast<std::size_t>(k)};
  }
  std::span<double> row(NodeId u) {
    return {data.data() + static_cast<std::size_t>(u) * k, static_cast<std::size_t>(k)};
  }
};

struct Node2VecParams {
  int dim = 16;
  int walks_per_node = 10;
  int walk_length = 40;
  double return_p = 1.0;  // 1/p bias toward revisiting the previous node
  double inout_q = 1.0;   // 1/q bias toward outward exploration
  int window = 5;
  int negatives = 5;
  int epochs = 3;
  double learning_rate = 0.025;
  std::uint64_t rng_seed = 0;
};

/// Skip-gram with negative sampling over second-order biased random walks.
/// Single-threaded and deterministic given the seed; isolated nodes keep
/// their initialized vectors.
EmbeddingMatrix node2vec_embed(const SocialGraph& g, const Node2VecParams& params);

// Binary layout: n_nodes and k as little-endian int64, then row-major
// little-endian doubles.
void save_embeddings_binary(const EmbeddingMatrix& m, std::ostream& out);
EmbeddingMatrix load_embeddings_binary(std::istream& in);
void save_embeddings_csv(const EmbeddingMatrix& m, std::ostream& out);

}  // namespace asl
