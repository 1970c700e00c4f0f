#include "asl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace asl {

using nn::Matrix;

Pi1Net::Pi1Net(const PolicyConfig& cfg, std::mt19937_64& rng)
    : d1_(5, cfg.pi1_hidden, "pi1.d1", rng),
      d2_(cfg.pi1_hidden, cfg.pi1_hidden, "pi1.d2", rng),
      d3_(cfg.pi1_hidden, kNumActivityKinds, "pi1.d3", rng) {}

std::vector<double> Pi1Net::forward(const std::array<double, 5>& features) {
  Matrix x(1, 5);
  std::copy(features.begin(), features.end(), x.v.begin());
  Matrix y = d3_.forward(r2_.forward(d2_.forward(r1_.forward(d1_.forward(x)))));
  return y.v;
}

void Pi1Net::backward(std::span<const double> dlogits) {
  Matrix dy(1, kNumActivityKinds);
  std::copy(dlogits.begin(), dlogits.end(), dy.v.begin());
  d1_.backward(r1_.backward(d2_.backward(r2_.backward(d3_.backward(dy)))));
}

std::vector<nn::Param*> Pi1Net::params() {
  return {&d1_.weight(), &d1_.bias(), &d2_.weight(), &d2_.bias(), &d3_.weight(), &d3_.bias()};
}

Value1Net::Value1Net(const PolicyConfig& cfg, std::mt19937_64& rng)
    : d1_(5, cfg.pi1_hidden, "v1.d1", rng),
      d2_(cfg.pi1_hidden, cfg.pi1_hidden, "v1.d2", rng),
      d3_(cfg.pi1_hidden, 1, "v1.d3", rng) {}

double Value1Net::forward(const std::array<double, 5>& features) {
  Matrix x(1, 5);
  std::copy(features.begin(), features.end(), x.v.begin());
  return d3_.forward(r2_.forward(d2_.forward(r1_.forward(d1_.forward(x))))).v[0];
}

void Value1Net::backward(double dvalue) {
  Matrix dy(1, 1);
  dy.v[0] = dvalue;
  d1_.backward(r1_.backward(d2_.backward(r2_.backward(d3_.backward(dy)))));
}

std::vector<nn::Param*> Value1Net::params() {
  return {&d1_.weight(), &d1_.bias(), &d2_.weight(), &d2_.bias(), &d3_.weight(), &d3_.bias()};
}

Pi2Net::Pi2Net(const PolicyConfig& cfg, std::mt19937_64& rng)
    : conv1_(cfg.embed_dim + 1, cfg.conv1_channels, 1, "pi2.conv1", rng),
      conv2_(cfg.conv1_channels, cfg.conv2_channels, 1, "pi2.conv2", rng),
      trunk1_(4, cfg.trunk_hidden, "pi2.trunk1", rng),
      trunk2_(cfg.trunk_hidden, cfg.conv2_channels, "pi2.trunk2", rng),
      head_(cfg.conv2_channels, 1, "pi2.head", rng) {}

std::vector<double> Pi2Net::forward(const Matrix& node_features,
                                    const std::array<double, 4>& snapshot) {
  n_cache_ = node_features.rows;
  Matrix node_h = cr2_.forward(conv2_.forward(cr1_.forward(conv1_.forward(node_features))));
  Matrix snap(1, 4);
  std::copy(snapshot.begin(), snapshot.end(), snap.v.begin());
  Matrix trunk = trunk2_.forward(tr1_.forward(trunk1_.forward(snap)));
  // broadcast-add the trunk vector to every node row
  Matrix combined(node_h.rows, node_h.cols);
  for (int r = 0; r < node_h.rows; ++r)
    for (int c = 0; c < node_h.cols; ++c) combined.at(r, c) = node_h.at(r, c) + trunk.at(0, c);
  Matrix logits = head_.forward(combine_relu_.forward(combined));
  return logits.v;
}

void Pi2Net::backward(std::span<const double> dlogits) {
  Matrix dy(n_cache_, 1);
  std::copy(dlogits.begin(), dlogits.end(), dy.v.begin());
  Matrix dcombined = combine_relu_.backward(head_.backward(dy));
  Matrix dtrunk(1, dcombined.cols);
  for (int r = 0; r < dcombined.rows; ++r)
    for (int c = 0; c < dcombined.cols; ++c) dtrunk.at(0, c) += dcombined.at(r, c);
  trunk1_.backward(tr1_.backward(trunk2_.backward(dtrunk)));
  conv1_.backward(cr1_.backward(conv2_.backward(cr2_.backward(dcombined))));
}

std::vector<nn::Param*> Pi2Net::params() {
  std::vector<nn::Param*> out;
  for (auto* p : conv1_.params()) out.push_back(p);
  for (auto* p : conv2_.params()) out.push_back(p);
  for (auto* p : trunk1_.params()) out.push_back(p);
  for (auto* p : trunk2_.params()) out.push_back(p);
  for (auto* p : head_.params()) out.push_back(p);
  return out;
}

Value2Net::Value2Net(const PolicyConfig& cfg, std::mt19937_64& rng)
    : conv1_(cfg.embed_dim + 1, cfg.conv1_channels, 1, "v2.conv1", rng),
      conv2_(cfg.conv1_channels, cfg.conv2_channels, 1, "v2.conv2", rng),
      trunk1_(4, cfg.trunk_hidden, "v2.trunk1", rng),
      trunk2_(cfg.trunk_hidden, cfg.conv2_channels, "v2.trunk2", rng),
      head_(cfg.conv2_channels, 1, "v2.head", rng) {}

double Value2Net::forward(const Matrix& node_features, const std::array<double, 4>& snapshot) {
  n_cache_ = node_features.rows;
  Matrix node_h = cr2_.forward(conv2_.forward(cr1_.forward(conv1_.forward(node_features))));
  Matrix snap(1, 4);
  std::copy(snapshot.begin(), snapshot.end(), snap.v.begin());
  Matrix trunk = trunk2_.forward(tr1_.forward(trunk1_.forward(snap)));
  Matrix combined(node_h.rows, node_h.cols);
  for (int r = 0; r < node_h.rows; ++r)
    for (int c = 0; c < node_h.cols; ++c) combined.at(r, c) = node_h.at(r, c) + trunk.at(0, c);
  Matrix hidden = combine_relu_.forward(combined);
  Matrix pooled(1, hidden.cols);
  for (int r = 0; r < hidden.rows; ++r)
    for (int c = 0; c < hidden.cols; ++c) pooled.at(0, c) += hidden.at(r, c);
  for (double& v : pooled.v) v /= hidden.rows;
  return head_.forward(pooled).v[0];
}

void Value2Net::backward(double dvalue) {
  Matrix dy(1, 1);
  dy.v[0] = dvalue;
  Matrix dpooled = head_.backward(dy);
  Matrix dhidden(n_cache_, dpooled.cols);
  for (int r = 0; r < n_cache_; ++r)
    for (int c = 0; c < dpooled.cols; ++c) dhidden.at(r, c) = dpooled.at(0, c) / n_cache_;
  Matrix dcombined = combine_relu_.backward(dhidden);
  Matrix dtrunk(1, dcombined.cols);
  for (int r = 0; r < dcombined.rows; ++r)
    for (int c = 0; c < dcombined.cols; ++c) dtrunk.at(0, c) += dcombined.at(r, c);
  trunk1_.backward(tr1_.backward(trunk2_.backward(dtrunk)));
  conv1_.backward(cr1_.backward(conv2_.backward(cr2_.backward(dcombined))));
}

std::vector<nn::Param*> Value2Net::params() {
  std::vector<nn::Param*> out;
  for (auto* p : conv1_.params()) out.push_back(p);
  for (auto* p : conv2_.params()) out.push_back(p);
  for (auto* p : trunk1_.params()) out.push_back(p);
  for (auto* p : trunk2_.params()) out.push_back(p);
  for (auto* p : head_.params()) out.push_back(p);
  return out;
}

PolicyBundle::PolicyBundle(const PolicyConfig& config) : cfg(config) {
  std::mt19937_64 rng(config.init_seed);
  pi1 = Pi1Net(config, rng);
  critic1 = Value1Net(config, rng);
  pi2 = Pi2Net(config, rng);
  critic2 = Value2Net(config, rng);
}

std::vector<nn::Param*> PolicyBundle::params() {
  std::vector<nn::Param*> out;
  for (auto* p : pi1.params()) out.push_back(p);
  for (auto* p : critic1.params()) out.push_back(p);
  for (auto* p : pi2.params()) out.push_back(p);
  for (auto* p : critic2.params()) out.push_back(p);
  return out;
}

void PolicyBundle::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest{{"format", "asl-policy"},
                          {"version", 1},
                          {"embed_dim", cfg.embed_dim},
                          {"pi1_hidden", cfg.pi1_hidden},
                          {"conv1_channels", cfg.conv1_channels},
                          {"conv2_channels", cfg.conv2_channels},
                          {"trunk_hidden", cfg.trunk_hidden}};
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  std::ofstream pf(fs::path(dir) / "params.bin", std::ios::binary);
  auto ps = const_cast<PolicyBundle*>(this)->params();
  nn::save_params(ps, pf);
}

PolicyBundle PolicyBundle::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("policy checkpoint: missing manifest.json in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.value("format", "") != "asl-policy")
    throw std::runtime_error("policy checkpoint: unrecognized manifest");
  PolicyConfig cfg;
  cfg.embed_dim = manifest.at("embed_dim").get<int>();
  cfg.pi1_hidden = manifest.at("pi1_hidden").get<int>();
  cfg.conv1_channels = manifest.at("conv1_channels").get<int>();
  cfg.conv2_channels = manifest.at("conv2_channels").get<int>();
  cfg.trunk_hidden = manifest.at("trunk_hidden").get<int>();
  PolicyBundle bundle(cfg);
  std::ifstream pf(fs::path(dir) / "params.bin", std::ios::binary);
  if (!pf) throw std::runtime_error("policy checkpoint: missing params.bin in " + dir);
  auto ps = bundle.params();
  nn::load_params(ps, pf);
  return bundle;
}

std::array<double, 5> pi1_features(const ObservationI& obs, NodeId n_nodes) {
  std::array<double, 5> f = obs.v;
  f[4] /= std::max<NodeId>(1, n_nodes);
  return f;
}

Matrix pi2_node_features(const ObservationII& obs) {
  const auto& emb = *obs.embeddings;
  Matrix x(emb.n_nodes, emb.k + 1);
  for (NodeId u = 0; u < emb.n_nodes; ++u) {
    auto row = emb.row(u);
    for (int d = 0; d < emb.k; ++d) x.at(u, d) = row[d];
    x.at(u, emb.k) = obs.membership[u];
  }
  return x;
}

std::size_t RolloutBuffer::agent_i_steps() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.agent_i.size();
  return n;
}

std::size_t RolloutBuffer::agent_ii_steps() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.agent_ii.size();
  return n;
}

void TrainConfig::validate() const {
  if (clip_eps <= 0.0 || clip_eps >= 1.0) throw std::invalid_argument("clip_eps must be in (0,1)");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) throw std::invalid_argument("gae_lambda must be in [0,1]");
  if (gamma_step <= 0.0 || gamma_step > 1.0 || gamma_delayed <= 0.0 || gamma_delayed > 1.0)
    throw std::invalid_argument("gamma must be in (0,1]");
  if (epochs < 1 || minibatch < 1 || episodes_per_update < 1 || total_updates < 0)
    throw std::invalid_argument("train config: counts must be positive");
}

RolloutBuffer collect_rollouts(PolicyBundle& bundle, const EpisodeFactory& factory,
                               int n_episodes, std::mt19937_64& rng, bool co_train) {
  if (!factory.detector) throw std::invalid_argument("collect_rollouts: no detector");
  RolloutBuffer buffer;
  for (int ep = 0; ep < n_episodes; ++ep) {
    auto graph = factory.make_graph(rng);
    auto embeddings = factory.make_embeddings(*graph, rng);
    EnvConfig env_cfg = factory.env_cfg;
    env_cfg.rng_seed = rng();
    Env env(*graph, *factory.detector, *embeddings, env_cfg);

    EpisodeRollout rollout;
    while (!env.terminated()) {
      auto feats = pi1_features(env.observe_i(), graph->n_nodes());
      auto logits = bundle.pi1.forward(feats);
      auto probs = nn::masked_softmax(logits, {});
      int action = nn::categorical_sample(probs, rng);
      double value = bundle.critic1.forward(feats);

      AgentIStep step_i;
      step_i.features = feats;
      step_i.action = action;
      step_i.log_prob = std::log(probs[action]);
      step_i.value = value;

      StepOutcome out = env.step_activity(static_cast<ActivityKind>(action));
      if (out.follower_phase_requested) {
        ObservationII obs2 = env.observe_ii();
        NodeId node;
        AgentIIStep step_ii;
        if (co_train) {
          Matrix node_feats = pi2_node_features(obs2);
          auto logits2 = bundle.pi2.forward(node_feats, obs2.activity);
          auto ev = nn::masked_softmax(logits2, obs2.mask);
          node = static_cast<NodeId>(nn::categorical_sample(ev, rng));
          step_ii.embeddings = embeddings;
          step_ii.snapshot = obs2.activity;
          step_ii.membership = obs2.membership;
          step_ii.mask = obs2.mask;
          step_ii.action = node;
          step_ii.log_prob = std::log(ev[node]);
          step_ii.value = bundle.critic2.forward(node_feats, obs2.activity);
        } else {
          // scripted uniform-random valid selector (the AgentI* ablation)
          std::vector<NodeId> valid;
          for (NodeId u = 0; u < graph->n_nodes(); ++u)
            if (obs2.mask[u]) valid.push_back(u);
          node = valid[rng() % valid.size()];
        }
        StepOutcome fout = env.step_follower(node);
        step_i.reward = fout.reward;  // shared global reward
        if (co_train) {
          step_ii.reward = fout.reward;
          rollout.agent_ii.push_back(std::move(step_ii));
        }
      } else {
        step_i.reward = out.reward;
      }
      rollout.agent_i.push_back(std::move(step_i));
    }
    rollout.record = make_episode_record(env);
    buffer.episodes.push_back(std::move(rollout));
  }
  return buffer;
}

namespace {

template <typename Step>
void gae_episode(std::vector<Step>& steps, double gamma, double lambda) {
  double next_value = 0.0;  // terminal: no bootstrap
  double next_adv = 0.0;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    double delta = it->reward + gamma * next_value - it->value;
    it->advantage = delta + gamma * lambda * next_adv;
    it->ret = it->advantage + it->value;
    next_value = it->value;
    next_adv = it->advantage;
  }
}

template <typename Step>
void normalize_advantages(std::vector<Step*>& steps) {
  if (steps.size() < 2) return;
  double mean = 0.0;
  for (auto* s : steps) mean += s->advantage;
  mean /= steps.size();
  double var = 0.0;
  for (auto* s : steps) var += (s->advantage - mean) * (s->advantage - mean);
  double sd = std::sqrt(var / steps.size());
  if (sd < 1e-8) sd = 1.0;
  for (auto* s : steps) s->advantage = (s->advantage - mean) / sd;
}

}  // namespace

void compute_advantages(RolloutBuffer& buffer, double gamma, double lambda) {
  std::vector<AgentIStep*> all_i;
  std::vector<AgentIIStep*> all_ii;
  for (auto& ep : buffer.episodes) {
    if (!ep.agent_i.empty() && ep.record.reason == TerminalReason::Running)
      throw std::invalid_argument("compute_advantages: incomplete episode in buffer");
    gae_episode(ep.agent_i, gamma, lambda);
    gae_episode(ep.agent_ii, gamma, lambda);
    for (auto& s : ep.agent_i) all_i.push_back(&s);
    for (auto& s : ep.agent_ii) all_ii.push_back(&s);
  }
  normalize_advantages(all_i);
  normalize_advantages(all_ii);
}

namespace {

// dLoss/dlogprob of the clipped surrogate for one sample.
double clipped_surrogate_grad(double ratio, double advantage, double eps) {
  double unclipped = ratio * advantage;
  double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  if (unclipped <= clipped) return -advantage * ratio;
  return 0.0;
}

}  // namespace

LossStats ppo_update(PolicyBundle& bundle, const RolloutBuffer& buffer, const TrainConfig& cfg,
                     nn::Adam& opt_pi1, nn::Adam& opt_v1, nn::Adam& opt_pi2, nn::Adam& opt_v2,
                     std::mt19937_64& rng) {
  cfg.validate();
  std::vector<const AgentIStep*> steps_i;
  std::vector<const AgentIIStep*> steps_ii;
  for (const auto& ep : buffer.episodes) {
    for (const auto& s : ep.agent_i) steps_i.push_back(&s);
    for (const auto& s : ep.agent_ii) steps_ii.push_back(&s);
  }
  if (steps_i.empty()) throw std::invalid_argument("ppo_update: empty buffer");

  LossStats stats;
  long count_i = 0, count_ii = 0;

  auto check = [](double x, const char* what) {
    if (!std::isfinite(x)) throw std::runtime_error(std::string("ppo_update: non-finite ") + what);
  };

  // ---- agent I ----
  std::vector<std::size_t> order(steps_i.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      std::size_t end = std::min(order.size(), start + cfg.minibatch);
      double batch = static_cast<double>(end - start);
      for (auto* p : bundle.pi1.params()) p->zero_grad();
      for (auto* p : bundle.critic1.params()) p->zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const AgentIStep& s = *steps_i[order[i]];
        auto logits = bundle.pi1.forward(s.features);
        auto ev = nn::categorical_eval(logits, {}, s.action);
        double ratio = std::exp(ev.log_prob - s.log_prob);
        check(ratio, "policy ratio (agent I)");
        double g_lp = clipped_surrogate_grad(ratio, s.advantage, cfg.clip_eps) / batch;
        auto dlogits = nn::categorical_backward(ev, s.action, g_lp, -cfg.entropy_coef / batch, {});
        bundle.pi1.backward(dlogits);

        double v = bundle.critic1.forward(s.features);
        check(v, "value (agent I)");
        bundle.critic1.backward(cfg.value_coef * (v - s.ret) / batch);

        stats.policy_loss_i += -std::min(ratio * s.advantage,
                                         std::clamp(ratio, 1 - cfg.clip_eps, 1 + cfg.clip_eps) *
                                             s.advantage);
        stats.value_loss_i += 0.5 * (v - s.ret) * (v - s.ret);
        stats.entropy_i += ev.entropy;
        ++count_i;
      }
      opt_pi1.step(bundle.pi1.params());
      opt_v1.step(bundle.critic1.params());
    }
  }

  // ---- agent II ----
  if (!steps_ii.empty()) {
    order.assign(steps_ii.size(), 0);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
        std::size_t end = std::min(order.size(), start + cfg.minibatch);
        double batch = static_cast<double>(end - start);
        for (auto* p : bundle.pi2.params()) p->zero_grad();
        for (auto* p : bundle.critic2.params()) p->zero_grad();
        for (std::size_t i = start; i < end; ++i) {
          const AgentIIStep& s = *steps_ii[order[i]];
          ObservationII obs;
          obs.embeddings = s.embeddings.get();
          obs.activity = s.snapshot;
          obs.membership = s.membership;
          obs.mask = s.mask;
          Matrix node_feats = pi2_node_features(obs);
          auto logits = bundle.pi2.forward(node_feats, s.snapshot);
          auto ev = nn::categorical_eval(logits, s.mask, s.action);
          double ratio = std::exp(ev.log_prob - s.log_prob);
          check(ratio, "policy ratio (agent II)");
          double g_lp = clipped_surrogate_grad(ratio, s.advantage, cfg.clip_eps) / batch;
          auto dlogits =
              nn::categorical_backward(ev, s.action, g_lp, -cfg.entropy_coef / batch, s.mask);
          bundle.pi2.backward(dlogits);

          double v = bundle.critic2.forward(node_feats, s.snapshot);
          check(v, "value (agent II)");
          bundle.critic2.backward(cfg.value_coef * (v - s.ret) / batch);

          stats.policy_loss_ii += -std::min(ratio * s.advantage,
                                            std::clamp(ratio, 1 - cfg.clip_eps, 1 + cfg.clip_eps) *
                                                s.advantage);
          stats.value_loss_ii += 0.5 * (v - s.ret) * (v - s.ret);
          stats.entropy_ii += ev.entropy;
          ++count_ii;
        }
        opt_pi2.step(bundle.pi2.params());
        opt_v2.step(bundle.critic2.params());
      }
    }
  }

  if (count_i > 0) {
    stats.policy_loss_i /= count_i;
    stats.value_loss_i /= count_i;
    stats.entropy_i /= count_i;
  }
  if (count_ii > 0) {
    stats.policy_loss_ii /= count_ii;
    stats.value_loss_ii /= count_ii;
    stats.entropy_ii /= count_ii;
  }
  return stats;
}

TrainResult train(PolicyBundle& bundle, const EpisodeFactory& factory, const TrainConfig& cfg,
                  std::function<void(const UpdateStats&)> on_update) {
  cfg.validate();
  std::mt19937_64 rng(cfg.rng_seed);
  nn::Adam opt_pi1({cfg.learning_rate}), opt_v1({cfg.learning_rate});
  nn::Adam opt_pi2({cfg.learning_rate}), opt_v2({cfg.learning_rate});

  TrainResult result;
  std::vector<std::vector<double>> best_params;

  auto snapshot = [&]() {
    best_params.clear();
    for (auto* p : bundle.params()) best_params.push_back(p->val.v);
  };

  for (int update = 0; update < cfg.total_updates; ++update) {
    RolloutBuffer buffer =
        collect_rollouts(bundle, factory, cfg.episodes_per_update, rng, cfg.co_train);
    compute_advantages(buffer, cfg.gamma_step, cfg.gae_lambda);

    UpdateStats us;
    us.update = update;
    for (const auto& ep : buffer.episodes) {
      us.mean_objective += ep.record.objective;
      us.mean_survived_intervals += ep.record.survived_intervals;
      us.mean_influence_ratio += ep.record.influence_ratio;
      us.mean_seq_length += static_cast<double>(ep.record.seq_length);
    }
    double n = static_cast<double>(buffer.episodes.size());
    us.mean_objective /= n;
    us.mean_survived_intervals /= n;
    us.mean_influence_ratio /= n;
    us.mean_seq_length /= n;

    us.losses = ppo_update(bundle, buffer, cfg, opt_pi1, opt_v1, opt_pi2, opt_v2, rng);
    result.curve.push_back(us);
    if (result.best_update < 0 || us.mean_objective > result.best_objective) {
      result.best_update = update;
      result.best_objective = us.mean_objective;
      snapshot();
    }
    if (on_update) on_update(us);
  }

  if (!best_params.empty()) {
    auto ps = bundle.params();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->val.v = best_params[i];
  }
  return result;
}

}  // namespace asl
