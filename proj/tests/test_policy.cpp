#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "asl/node2vec.hpp"
#include "asl/policy.hpp"

using namespace asl;

namespace {

EpisodeRollout scripted_episode(std::initializer_list<std::pair<double, double>> reward_value) {
  EpisodeRollout ep;
  for (auto [r, v] : reward_value) {
    AgentIStep s;
    s.reward = r;
    s.value = v;
    ep.agent_i.push_back(s);
  }
  ep.record.reason = TerminalReason::Horizon;
  return ep;
}

std::shared_ptr<const EmbeddingMatrix> tiny_embeddings(NodeId n, int k) {
  auto emb = std::make_shared<EmbeddingMatrix>();
  emb->n_nodes = n;
  emb->k = k;
  emb->data.assign(static_cast<std::size_t>(n) * k, 0.1);
  return emb;
}

}  // namespace

TEST_CASE("single-step returns equal the reward") {
  RolloutBuffer buf;
  buf.episodes.push_back(scripted_episode({{3.0, 1.0}}));
  compute_advantages(buf, 0.9, 0.5);
  // terminal step bootstraps nothing: ret = adv + v = (r - v) + v = r
  CHECK(buf.episodes[0].agent_i[0].ret == doctest::Approx(3.0));
}

TEST_CASE("lambda=1, gamma=1 returns are undiscounted reward-to-go") {
  RolloutBuffer buf;
  buf.episodes.push_back(scripted_episode({{1.0, 0.3}, {2.0, -0.5}, {4.0, 0.1}}));
  compute_advantages(buf, 1.0, 1.0);
  const auto& steps = buf.episodes[0].agent_i;
  CHECK(steps[0].ret == doctest::Approx(7.0));
  CHECK(steps[1].ret == doctest::Approx(6.0));
  CHECK(steps[2].ret == doctest::Approx(4.0));
}

TEST_CASE("lambda=0 reduces to one-step temporal-difference targets") {
  RolloutBuffer buf;
  buf.episodes.push_back(scripted_episode({{1.0, 0.5}, {2.0, 1.5}, {3.0, -1.0}}));
  const double gamma = 0.9;
  compute_advantages(buf, gamma, 0.0);
  const auto& steps = buf.episodes[0].agent_i;
  CHECK(steps[0].ret == doctest::Approx(1.0 + gamma * 1.5));
  CHECK(steps[1].ret == doctest::Approx(2.0 + gamma * -1.0));
  CHECK(steps[2].ret == doctest::Approx(3.0));
}

TEST_CASE("advantages are normalized across the buffer") {
  RolloutBuffer buf;
  buf.episodes.push_back(scripted_episode({{1.0, 0.0}, {5.0, 0.0}, {-2.0, 0.0}, {0.5, 0.0}}));
  compute_advantages(buf, 0.99, 0.95);
  double mean = 0.0;
  for (const auto& s : buf.episodes[0].agent_i) mean += s.advantage;
  mean /= 4.0;
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("incomplete episodes are rejected") {
  RolloutBuffer buf;
  EpisodeRollout ep = scripted_episode({{1.0, 0.0}});
  ep.record.reason = TerminalReason::Running;
  buf.episodes.push_back(ep);
  CHECK_THROWS_AS(compute_advantages(buf, 0.99, 0.95), std::invalid_argument);
}

TEST_CASE("stored log-probs match a recomputation from fresh forward passes") {
  PolicyConfig pc;
  pc.embed_dim = 4;
  pc.init_seed = 21;
  PolicyBundle bundle(pc);
  std::mt19937_64 rng(5);

  std::array<double, 5> features{0.2, 0.1, 0.0, 0.3, 2.0};
  auto logits = bundle.pi1.forward(features);
  auto ev = nn::categorical_eval(logits, {}, 1);
  auto logits2 = bundle.pi1.forward(features);
  auto ev2 = nn::categorical_eval(logits2, {}, 1);
  CHECK(std::abs(ev.log_prob - ev2.log_prob) < 1e-9);

  auto emb = tiny_embeddings(6, 4);
  ObservationII obs;
  obs.embeddings = emb.get();
  obs.activity = {0.3, 0.3, 0.2, 0.2};
  obs.membership.assign(6, 0.7);
  obs.mask.assign(6, 1);
  obs.mask[2] = 0;
  auto l2 = bundle.pi2.forward(pi2_node_features(obs), obs.activity);
  auto e2 = nn::categorical_eval(l2, obs.mask, 4);
  auto l2b = bundle.pi2.forward(pi2_node_features(obs), obs.activity);
  auto e2b = nn::categorical_eval(l2b, obs.mask, 4);
  CHECK(std::abs(e2.log_prob - e2b.log_prob) < 1e-9);
}

TEST_CASE("masked nodes are never sampled from the follower policy") {
  PolicyConfig pc;
  pc.embed_dim = 4;
  pc.init_seed = 3;
  PolicyBundle bundle(pc);
  auto emb = tiny_embeddings(8, 4);
  ObservationII obs;
  obs.embeddings = emb.get();
  obs.activity = {0.25, 0.25, 0.25, 0.25};
  obs.membership.assign(8, 0.5);
  obs.mask.assign(8, 1);
  obs.mask[0] = obs.mask[3] = obs.mask[7] = 0;
  auto logits = bundle.pi2.forward(pi2_node_features(obs), obs.activity);
  auto probs = nn::masked_softmax(logits, obs.mask);
  std::mt19937_64 rng(100);
  for (int i = 0; i < 100000; ++i) {
    int pick = nn::categorical_sample(probs, rng);
    REQUIRE(obs.mask[pick] == 1);
  }
}

TEST_CASE("near-zero clipping keeps parameters within the optimizer step bound") {
  PolicyConfig pc;
  pc.embed_dim = 4;
  pc.pi1_hidden = 8;
  pc.conv1_channels = 6;
  pc.conv2_channels = 4;
  pc.trunk_hidden = 8;
  pc.init_seed = 7;
  PolicyBundle bundle(pc);
  std::mt19937_64 rng(9);

  // one scripted episode with policy-consistent log-probs
  RolloutBuffer buf;
  EpisodeRollout ep;
  auto emb = tiny_embeddings(5, 4);
  for (int t = 0; t < 6; ++t) {
    AgentIStep s;
    s.features = {0.1 * t, 0.0, 0.2, 0.0, static_cast<double>(t)};
    auto logits = bundle.pi1.forward(s.features);
    auto probs = nn::masked_softmax(logits, {});
    s.action = t % 4;
    s.log_prob = std::log(probs[s.action]);
    s.value = bundle.critic1.forward(s.features);
    s.reward = (t % 2) ? 1.0 : -1.0;
    ep.agent_i.push_back(s);

    AgentIIStep s2;
    s2.embeddings = emb;
    s2.snapshot = {0.25, 0.25, 0.25, 0.25};
    s2.membership.assign(5, 0.4);
    s2.mask.assign(5, 1);
    ObservationII obs;
    obs.embeddings = emb.get();
    obs.activity = s2.snapshot;
    obs.membership = s2.membership;
    obs.mask = s2.mask;
    auto l2 = bundle.pi2.forward(pi2_node_features(obs), obs.activity);
    auto p2 = nn::masked_softmax(l2, obs.mask);
    s2.action = t % 5;
    s2.log_prob = std::log(p2[s2.action]);
    s2.value = bundle.critic2.forward(pi2_node_features(obs), obs.activity);
    s2.reward = s.reward;
    ep.agent_ii.push_back(s2);
  }
  ep.record.reason = TerminalReason::Horizon;
  buf.episodes.push_back(ep);
  compute_advantages(buf, 0.99, 0.95);

  TrainConfig tc;
  tc.clip_eps = 1e-6;
  tc.epochs = 1;
  tc.minibatch = 2;
  tc.entropy_coef = 0.0;
  tc.learning_rate = 1e-4;

  std::vector<double> before;
  for (nn::Param* p : bundle.params())
    before.insert(before.end(), p->val.v.begin(), p->val.v.end());

  nn::AdamConfig ac;
  ac.lr = tc.learning_rate;
  nn::Adam o1(ac), o2(ac), o3(ac), o4(ac);
  ppo_update(bundle, buf, tc, o1, o2, o3, o4, rng);

  std::vector<double> after;
  for (nn::Param* p : bundle.params())
    after.insert(after.end(), p->val.v.begin(), p->val.v.end());
  REQUIRE(before.size() == after.size());
  // 6 steps / minibatch 2 -> 3 optimizer steps per network; Adam moves each
  // coordinate by at most ~lr per step
  double drift = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i)
    drift = std::max(drift, std::abs(after[i] - before[i]));
  CHECK(drift <= 3 * tc.learning_rate * 1.1);
}

TEST_CASE("policy bundle checkpoints round-trip bit-exactly") {
  PolicyConfig pc;
  pc.embed_dim = 6;
  pc.init_seed = 33;
  PolicyBundle bundle(pc);
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "asl_test_bundle_roundtrip";
  std::filesystem::remove_all(dir);
  bundle.save(dir.string());
  PolicyBundle copy = PolicyBundle::load(dir.string());
  auto pa = bundle.params();
  auto pb = copy.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->val.v == pb[i]->val.v);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(PolicyBundle::load((dir / "missing").string()), std::exception);
}

TEST_CASE("ppo learns a two-armed bandit") {
  PolicyConfig pc;
  pc.embed_dim = 4;
  pc.pi1_hidden = 16;
  pc.init_seed = 12;
  PolicyBundle bundle(pc);
  std::mt19937_64 rng(13);

  TrainConfig tc;
  tc.epochs = 2;
  tc.minibatch = 32;
  tc.entropy_coef = 0.001;
  tc.learning_rate = 0.01;
  nn::AdamConfig ac;
  ac.lr = tc.learning_rate;
  nn::Adam o1(ac), o2(ac), o3(ac), o4(ac);

  const std::array<double, 5> state{0.0, 0.0, 0.0, 0.0, 0.0};
  const int best = 2;
  for (int update = 0; update < 200; ++update) {
    RolloutBuffer buf;
    for (int e = 0; e < 32; ++e) {
      EpisodeRollout ep;
      AgentIStep s;
      s.features = state;
      auto probs = nn::masked_softmax(bundle.pi1.forward(state), {});
      s.action = nn::categorical_sample(probs, rng);
      s.log_prob = std::log(probs[s.action]);
      s.value = bundle.critic1.forward(state);
      s.reward = s.action == best ? 1.0 : 0.0;
      ep.agent_i.push_back(s);
      ep.record.reason = TerminalReason::Horizon;
      buf.episodes.push_back(ep);
    }
    compute_advantages(buf, tc.gamma_step, tc.gae_lambda);
    ppo_update(bundle, buf, tc, o1, o2, o3, o4, rng);
    auto probs = nn::masked_softmax(bundle.pi1.forward(state), {});
    if (probs[best] >= 0.95) break;
  }
  auto probs = nn::masked_softmax(bundle.pi1.forward(state), {});
  CHECK(probs[best] >= 0.95);
}

TEST_CASE("rollout collection without co-training keeps the follower buffer empty") {
  CommunityConfig cc;
  cc.community_sizes = {6, 6};
  cc.rng_seed = 4;
  auto graph = std::make_shared<const SocialGraph>(generate_synthetic(cc));
  auto emb = tiny_embeddings(graph->n_nodes(), 4);

  Dataset corpus;
  ActivityProfile human, bot;
  human.rates = {0.6, 0.08, 0.1, 0.05};
  bot.rates = {0.15, 0.55, 0.25, 0.2};
  corpus = generate_labeled_corpus(human, bot, 30, 20, 6);
  ForestParams fp;
  fp.n_trees = 10;
  fp.rng_seed = 6;
  RandomForest forest = RandomForest::train(corpus, fp);

  EpisodeFactory factory;
  factory.make_graph = [graph](std::mt19937_64&) { return graph; };
  factory.make_embeddings =
      [emb](const SocialGraph&, std::mt19937_64&) { return emb; };
  factory.detector = &forest;
  factory.env_cfg.T = 25;
  factory.env_cfg.n_sims_reward = 20;

  PolicyConfig pc;
  pc.embed_dim = 4;
  pc.init_seed = 2;
  PolicyBundle bundle(pc);
  std::mt19937_64 rng(7);

  RolloutBuffer with = collect_rollouts(bundle, factory, 3, rng, true);
  bool any_follower_steps = false;
  for (const auto& ep : with.episodes) any_follower_steps |= !ep.agent_ii.empty();
  // with co-training, follower decisions are recorded whenever they occur
  CHECK(with.episodes.size() == 3);

  RolloutBuffer without = collect_rollouts(bundle, factory, 3, rng, false);
  CHECK(without.episodes.size() == 3);
  for (const auto& ep : without.episodes) {
    CHECK(ep.agent_ii.empty());
    CHECK(!ep.agent_i.empty());
    CHECK(ep.record.reason != TerminalReason::Running);
  }
  (void)any_follower_steps;
}

TEST_CASE("training for zero updates leaves the bundle unchanged") {
  CommunityConfig cc;
  cc.community_sizes = {5};
  cc.rng_seed = 1;
  auto graph = std::make_shared<const SocialGraph>(generate_synthetic(cc));
  auto emb = tiny_embeddings(graph->n_nodes(), 4);
  ActivityProfile human, bot;
  human.rates = {0.6, 0.08, 0.1, 0.05};
  bot.rates = {0.15, 0.55, 0.25, 0.2};
  Dataset corpus = generate_labeled_corpus(human, bot, 20, 15, 3);
  ForestParams fp;
  fp.n_trees = 5;
  RandomForest forest = RandomForest::train(corpus, fp);

  EpisodeFactory factory;
  factory.make_graph = [graph](std::mt19937_64&) { return graph; };
  factory.make_embeddings = [emb](const SocialGraph&, std::mt19937_64&) { return emb; };
  factory.detector = &forest;
  factory.env_cfg.T = 10;
  factory.env_cfg.n_sims_reward = 10;

  PolicyConfig pc;
  pc.embed_dim = 4;
  pc.init_seed = 5;
  PolicyBundle bundle(pc);
  std::vector<double> before;
  for (nn::Param* p : bundle.params())
    before.insert(before.end(), p->val.v.begin(), p->val.v.end());

  TrainConfig tc;
  tc.total_updates = 0;
  tc.episodes_per_update = 1;
  TrainResult result = train(bundle, factory, tc);
  CHECK(result.curve.empty());
  std::vector<double> after;
  for (nn::Param* p : bundle.params())
    after.insert(after.end(), p->val.v.begin(), p->val.v.end());
  CHECK(before == after);
}
