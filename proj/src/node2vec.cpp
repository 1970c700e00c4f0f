#include "asl/node2vec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

namespace asl {

namespace {

// Walks follow out-edges with the standard second-order bias: weight 1/p to
// return to the previous node, 1 for neighbors of the previous node, 1/q
// otherwise.
std::vector<NodeId> sample_walk(const SocialGraph& g, NodeId start, int length,
                                double return_p, double inout_q, std::mt19937_64& rng) {
  std::vector<NodeId> walk;
  walk.reserve(length);
  walk.push_back(start);
  if (g.out_degree(start) == 0) return walk;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> weights;
  while (static_cast<int>(walk.size()) < length) {
    NodeId cur = walk.back();
    const auto& nbrs = g.out_neighbors(cur);
    if (nbrs.empty()) break;
    NodeId next;
    if (walk.size() == 1) {
      next = nbrs[static_cast<std::size_t>(u01(rng) * nbrs.size()) % nbrs.size()];
    } else {
      NodeId prev = walk[walk.size() - 2];
      weights.resize(nbrs.size());
      double total = 0.0;
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        double w;
        if (nbrs[i] == prev)
          w = 1.0 / return_p;
        else if (g.has_edge(prev, nbrs[i]))
          w = 1.0;
        else
          w = 1.0 / inout_q;
        total += w;
        weights[i] = total;
      }
      double r = u01(rng) * total;
      std::size_t idx = std::lower_bound(weights.begin(), weights.end(), r) - weights.begin();
      if (idx >= nbrs.size()) idx = nbrs.size() - 1;
      next = nbrs[idx];
    }
    walk.push_back(next);
  }
  return walk;
}

}  // namespace

EmbeddingMatrix node2vec_embed(const SocialGraph& g, const Node2VecParams& params) {
  if (g.n_nodes() < 1) throw std::invalid_argument("node2vec: graph must have >= 1 node");
  if (params.dim <= 0) throw std::invalid_argument("node2vec: dim must be > 0");
  if (params.walk_length <= 0) throw std::invalid_argument("node2vec: walk_length must be > 0");
  if (params.walks_per_node <= 0)
    throw std::invalid_argument("node2vec: walks_per_node must be > 0");
  if (params.window <= 0) throw std::invalid_argument("node2vec: window must be > 0");
  if (params.epochs < 0) throw std::invalid_argument("node2vec: epochs must be >= 0");
  if (params.return_p <= 0.0 || params.inout_q <= 0.0)
    throw std::invalid_argument("node2vec: return_p and inout_q must be > 0");

  const NodeId n = g.n_nodes();
  const int k = params.dim;
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  EmbeddingMatrix in_vec{n, k, std::vector<double>(static_cast<std::size_t>(n) * k)};
  std::vector<double> out_vec(static_cast<std::size_t>(n) * k, 0.0);
  for (double& w : in_vec.data) w = (u01(rng) - 0.5) / k;

  // Walk corpus, regenerated once; epochs re-sweep the same walks.
  std::vector<std::vector<NodeId>> walks;
  walks.reserve(static_cast<std::size_t>(n) * params.walks_per_node);
  for (int w = 0; w < params.walks_per_node; ++w)
    for (NodeId u = 0; u < n; ++u)
      walks.push_back(sample_walk(g, u, params.walk_length, params.return_p, params.inout_q, rng));

  // Negative-sampling table over (1 + total degree)^0.75.
  std::vector<double> neg_cdf(n);
  double total = 0.0;
  for (NodeId u = 0; u < n; ++u) {
    total += std::pow(1.0 + g.out_degree(u) + g.in_degree(u), 0.75);
    neg_cdf[u] = total;
  }
  auto sample_negative = [&](void) -> NodeId {
    double r = u01(rng) * total;
    auto it = std::lower_bound(neg_cdf.begin(), neg_cdf.end(), r);
    return static_cast<NodeId>(std::min<std::ptrdiff_t>(it - neg_cdf.begin(), n - 1));
  };

  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  std::vector<double> grad_center(k);

  const long total_pairs_per_epoch = [&] {
    long c = 0;
    for (const auto& w : walks) c += static_cast<long>(w.size());
    return c;
  }();
  long seen = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (const auto& walk : walks) {
      for (std::size_t i = 0; i < walk.size(); ++i) {
        ++seen;
        double progress = static_cast<double>(seen) /
                          (static_cast<double>(total_pairs_per_epoch) * params.epochs);
        double lr = params.learning_rate * std::max(0.05, 1.0 - progress);
        NodeId center = walk[i];
        double* vc = in_vec.row(center).data();
        std::size_t lo = i > static_cast<std::size_t>(params.window) ? i - params.window : 0;
        std::size_t hi = std::min(walk.size(), i + params.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          std::fill(grad_center.begin(), grad_center.end(), 0.0);
          for (int s = 0; s <= params.negatives; ++s) {
            NodeId ctx = s == 0 ? walk[j] : sample_negative();
            double label = s == 0 ? 1.0 : 0.0;
            if (s > 0 && ctx == walk[j]) continue;
            double* vo = out_vec.data() + static_cast<std::size_t>(ctx) * k;
            double dot = 0.0;
            for (int d = 0; d < k; ++d) dot += vc[d] * vo[d];
            double err = (label - sigmoid(dot)) * lr;
            for (int d = 0; d < k; ++d) {
              grad_center[d] += err * vo[d];
              vo[d] += err * vc[d];
            }
          }
          for (int d = 0; d < k; ++d) vc[d] += grad_center[d];
        }
      }
    }
  }
  return in_vec;
}

namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  auto bits = static_cast<std::uint64_t>(0);
  static_assert(sizeof(T) == 8);
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("embedding stream truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  T v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_embeddings_binary(const EmbeddingMatrix& m, std::ostream& out) {
  write_le<std::int64_t>(out, m.n_nodes);
  write_le<std::int64_t>(out, m.k);
  for (double v : m.data) write_le<double>(out, v);
}

EmbeddingMatrix load_embeddings_binary(std::istream& in) {
  EmbeddingMatrix m;
  auto n = read_le<std::int64_t>(in);
  auto k = read_le<std::int64_t>(in);
  if (n < 0 || k <= 0) throw std::runtime_error("embedding header invalid");
  m.n_nodes = static_cast<NodeId>(n);
  m.k = static_cast<int>(k);
  m.data.resize(static_cast<std::size_t>(n) * k);
  for (double& v : m.data) v = read_le<double>(in);
  return m;
}

void save_embeddings_csv(const EmbeddingMatrix& m, std::ostream& out) {
  out << "node";
  for (int d = 0; d < m.k; ++d) out << ",e" << d;
  out << "\n";
  for (NodeId u = 0; u < m.n_nodes; ++u) {
    out << u;
    for (double v : m.row(u)) out << "," << v;
    out << "\n";
  }
}

}  // namespace asl
