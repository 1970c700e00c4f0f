#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "asl/node2vec.hpp"

using namespace asl;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::max(1e-12, std::sqrt(aa) * std::sqrt(bb));
}

SocialGraph two_cliques(NodeId clique_size) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId block = 0; block < 2; ++block) {
    NodeId base = block * clique_size;
    for (NodeId a = 0; a < clique_size; ++a)
      for (NodeId b = 0; b < clique_size; ++b)
        if (a != b) edges.push_back({base + a, base + b});
  }
  // one bridge so walks occasionally cross
  edges.push_back({clique_size - 1, clique_size});
  edges.push_back({clique_size, clique_size - 1});
  return SocialGraph::from_edges(2 * clique_size, std::move(edges));
}

}  // namespace

TEST_CASE("embedding dimensions and determinism") {
  CommunityConfig cc;
  cc.community_sizes = {8, 8};
  cc.rng_seed = 2;
  SocialGraph g = generate_synthetic(cc);
  Node2VecParams params;
  params.dim = 12;
  params.walks_per_node = 5;
  params.walk_length = 15;
  params.epochs = 1;
  params.rng_seed = 77;

  EmbeddingMatrix a = node2vec_embed(g, params);
  CHECK(a.n_nodes == g.n_nodes());
  CHECK(a.k == 12);
  CHECK(a.data.size() == static_cast<std::size_t>(g.n_nodes()) * 12);

  EmbeddingMatrix b = node2vec_embed(g, params);
  CHECK(a.data == b.data);

  params.rng_seed = 78;
  EmbeddingMatrix c = node2vec_embed(g, params);
  CHECK(a.data != c.data);
}

TEST_CASE("two disjoint cliques separate: intra cosine beats cross cosine") {
  SocialGraph g = two_cliques(10);
  Node2VecParams params;
  params.dim = 16;
  params.rng_seed = 5;
  EmbeddingMatrix emb = node2vec_embed(g, params);

  double intra = 0.0, cross = 0.0;
  long n_intra = 0, n_cross = 0;
  for (NodeId a = 0; a < 20; ++a)
    for (NodeId b = a + 1; b < 20; ++b) {
      double c = cosine(emb.row(a), emb.row(b));
      if ((a < 10) == (b < 10)) {
        intra += c;
        ++n_intra;
      } else {
        cross += c;
        ++n_cross;
      }
    }
  CHECK(intra / n_intra > cross / n_cross);
}

TEST_CASE("isolated nodes keep finite initialization vectors") {
  // node 4 has no edges at all
  SocialGraph g = SocialGraph::from_edges(5, {{0, 1}, {1, 0}, {1, 2}, {2, 3}, {3, 0}});
  Node2VecParams params;
  params.dim = 8;
  params.rng_seed = 3;
  EmbeddingMatrix emb = node2vec_embed(g, params);
  double norm = 0.0;
  for (double x : emb.row(4)) {
    CHECK(std::isfinite(x));
    norm += x * x;
  }
  CHECK(norm > 0.0);
}

TEST_CASE("binary round trip is exact and csv has one row per node") {
  SocialGraph g = two_cliques(4);
  Node2VecParams params;
  params.dim = 6;
  params.walks_per_node = 3;
  params.walk_length = 8;
  params.epochs = 1;
  params.rng_seed = 4;
  EmbeddingMatrix emb = node2vec_embed(g, params);

  std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
  save_embeddings_binary(emb, bin);
  EmbeddingMatrix back = load_embeddings_binary(bin);
  CHECK(back.n_nodes == emb.n_nodes);
  CHECK(back.k == emb.k);
  CHECK(back.data == emb.data);

  std::stringstream csv;
  save_embeddings_csv(emb, csv);
  long lines = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++lines;
  CHECK(lines == emb.n_nodes + 1);  // header plus one row per node

  std::stringstream truncated(std::string("\x01\x02", 2));
  CHECK_THROWS_AS(load_embeddings_binary(truncated), std::exception);
}

TEST_CASE("parameter validation") {
  SocialGraph g = two_cliques(3);
  Node2VecParams params;
  params.dim = 0;
  CHECK_THROWS_AS(node2vec_embed(g, params), std::exception);
  params.dim = 4;
  params.walk_length = 0;
  CHECK_THROWS_AS(node2vec_embed(g, params), std::exception);
}
