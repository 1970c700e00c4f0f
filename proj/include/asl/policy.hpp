#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "asl/env.hpp"
#include "asl/nn.hpp"

namespace asl {

struct PolicyConfig {
  int embed_dim = 16;
  int pi1_hidden = 64;
  int conv1_channels = 32;
  int conv2_channels = 16;
  int trunk_hidden = 64;
  std::uint64_t init_seed = 0;
};

/// Activity policy: 5 -> hidden -> hidden -> 4 logits.
class Pi1Net {
public:
  Pi1Net() = default;
  Pi1Net(const PolicyConfig& cfg, std::mt19937_64& rng);
  std::vector<double> forward(const std::array<double, 5>& features);
  void backward(std::span<const double> dlogits);
  std::vector<nn::Param*> params();

private:
  nn::Dense d1_, d2_, d3_;
  nn::Relu r1_, r2_;
};

/// Scalar critic over the same 5-feature input.
class Value1Net {
public:
  Value1Net() = default;
  Value1Net(const PolicyConfig& cfg, std::mt19937_64& rng);
  double forward(const std::array<double, 5>& features);
  void backward(double dvalue);
  std::vector<nn::Param*> params();

private:
  nn::Dense d1_, d2_, d3_;
  nn::Relu r1_, r2_;
};

/// Follower policy: width-1 convolutions over the per-node
/// (embedding | membership) stack, an MLP trunk over the 4-value activity
/// snapshot broadcast to all nodes, and a shared per-node logit head. The
/// parameter count is independent of |V|.
class Pi2Net {
public:
  Pi2Net() = default;
  Pi2Net(const PolicyConfig& cfg, std::mt19937_64& rng);
  // returns one logit per node
  std::vector<double> forward(const nn::Matrix& node_features,
                              const std::array<double, 4>& snapshot);
  void backward(std::span<const double> dlogits);
  std::vector<nn::Param*> params();

private:
  nn::Conv1d conv1_, conv2_;
  nn::Relu cr1_, cr2_, combine_relu_;
  nn::Dense trunk1_, trunk2_, head_;
  nn::Relu tr1_;
  int n_cache_ = 0;
};

/// Critic over the same node stack; per-node features are mean-pooled.
class Value2Net {
public:
  Value2Net() = default;
  Value2Net(const PolicyConfig& cfg, std::mt19937_64& rng);
  double forward(const nn::Matrix& node_features, const std::array<double, 4>& snapshot);
  void backward(double dvalue);
  std::vector<nn::Param*> params();

private:
  nn::Conv1d conv1_, conv2_;
  nn::Relu cr1_, cr2_, combine_relu_;
  nn::Dense trunk1_, trunk2_, head_;
  nn::Relu tr1_;
  int n_cache_ = 0;
};

struct PolicyBundle {
  PolicyConfig cfg;
  Pi1Net pi1;
  Value1Net critic1;
  Pi2Net pi2;
  Value2Net critic2;

  explicit PolicyBundle(const PolicyConfig& config);
  std::vector<nn::Param*> params();

  void save(const std::string& dir) const;  // manifest.json + params.bin
  static PolicyBundle load(const std::string& dir);
};

// Feature preparation shared by collection and updates. |S| is scaled by the
// node count before entering pi1.
std::array<double, 5> pi1_features(const ObservationI& obs, NodeId n_nodes);
nn::Matrix pi2_node_features(const ObservationII& obs);

struct AgentIStep {
  std::array<double, 5> features{};
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct AgentIIStep {
  std::shared_ptr<const EmbeddingMatrix> embeddings;
  std::array<double, 4> snapshot{};
  std::vector<double> membership;
  std::vector<std::uint8_t> mask;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct EpisodeRollout {
  std::vector<AgentIStep> agent_i;
  std::vector<AgentIIStep> agent_ii;
  EpisodeRecord record;
};

struct RolloutBuffer {
  std::vector<EpisodeRollout> episodes;
  std::size_t agent_i_steps() const;
  std::size_t agent_ii_steps() const;
};

struct TrainConfig {
  double clip_eps = 0.2;
  double gae_lambda = 0.95;
  double gamma_step = 0.99;
  double gamma_delayed = 0.99;
  int epochs = 4;
  int minibatch = 64;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double learning_rate = 3e-4;
  int episodes_per_update = 16;
  int total_updates = 100;
  bool co_train = true;  // false: pi1 trains against a scripted random selector
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Per-episode environment factory: a fresh synthetic graph plus its
/// embeddings. Shared across episodes of one training run.
struct EpisodeFactory {
  std::function<std::shared_ptr<const SocialGraph>(std::mt19937_64&)> make_graph;
  std::function<std::shared_ptr<const EmbeddingMatrix>(const SocialGraph&, std::mt19937_64&)>
      make_embeddings;
  const RandomForest* detector = nullptr;
  EnvConfig env_cfg;
};

RolloutBuffer collect_rollouts(PolicyBundle& bundle, const EpisodeFactory& factory,
                               int n_episodes, std::mt19937_64& rng, bool co_train = true);

void compute_advantages(RolloutBuffer& buffer, double gamma, double lambda);

struct LossStats {
  double policy_loss_i = 0.0, value_loss_i = 0.0, entropy_i = 0.0;
  double policy_loss_ii = 0.0, value_loss_ii = 0.0, entropy_ii = 0.0;
};

LossStats ppo_update(PolicyBundle& bundle, const RolloutBuffer& buffer, const TrainConfig& cfg,
                     nn::Adam& opt_pi1, nn::Adam& opt_v1, nn::Adam& opt_pi2, nn::Adam& opt_v2,
                     std::mt19937_64& rng);

struct UpdateStats {
  int update = 0;
  double mean_objective = 0.0;
  double mean_survived_intervals = 0.0;
  double mean_influence_ratio = 0.0;
  double mean_seq_length = 0.0;
  LossStats losses;
};

struct TrainResult {
  std::vector<UpdateStats> curve;
  int best_update = -1;
  double best_objective = 0.0;
};

/// Full training loop; keeps the bundle at the parameters of the update with
/// the best mean episode objective.
TrainResult train(PolicyBundle& bundle, const EpisodeFactory& factory, const TrainConfig& cfg,
                  std::function<void(const UpdateStats&)> on_update = {});

}  // namespace asl
