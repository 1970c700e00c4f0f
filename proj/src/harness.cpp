#include "asl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "asl/diffusion.hpp"
#include "asl/node2vec.hpp"

namespace asl::harness {

using nlohmann::json;

CommunityConfig sample_community_config(const GraphProfile& profile, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_comm(profile.communities_min, profile.communities_max);
  std::uniform_int_distribution<NodeId> size(profile.size_min, profile.size_max);
  CommunityConfig cfg;
  int n = n_comm(rng);
  for (int i = 0; i < n; ++i) cfg.community_sizes.push_back(size(rng));
  cfg.p_intra = profile.p_intra;
  cfg.p_inter = profile.p_inter;
  cfg.rng_seed = rng();
  return cfg;
}

namespace {

void parse_graph(const json& j, GraphProfile& g) {
  g.communities_min = j.value("communities_min", g.communities_min);
  g.communities_max = j.value("communities_max", g.communities_max);
  g.size_min = j.value("size_min", g.size_min);
  g.size_max = j.value("size_max", g.size_max);
  g.p_intra = j.value("p_intra", g.p_intra);
  g.p_inter = j.value("p_inter", g.p_inter);
}

void parse_n2v(const json& j, Node2VecParams& n) {
  n.dim = j.value("dim", n.dim);
  n.walks_per_node = j.value("walks_per_node", n.walks_per_node);
  n.walk_length = j.value("walk_length", n.walk_length);
  n.return_p = j.value("return_p", n.return_p);
  n.inout_q = j.value("inout_q", n.inout_q);
  n.window = j.value("window", n.window);
  n.negatives = j.value("negatives", n.negatives);
  n.epochs = j.value("epochs", n.epochs);
  n.learning_rate = j.value("learning_rate", n.learning_rate);
}

void parse_env(const json& j, EnvConfig& e) {
  e.K = j.value("K", e.K);
  e.Q = j.value("Q", e.Q);
  e.T = j.value("T", e.T);
  e.p = j.value("p", e.p);
  e.n_sims_reward = j.value("n_sims_reward", e.n_sims_reward);
}

void parse_train(const json& j, TrainConfig& t) {
  t.clip_eps = j.value("clip_eps", t.clip_eps);
  t.gae_lambda = j.value("gae_lambda", t.gae_lambda);
  t.gamma_step = j.value("gamma_step", t.gamma_step);
  t.gamma_delayed = j.value("gamma_delayed", t.gamma_delayed);
  t.epochs = j.value("epochs", t.epochs);
  t.minibatch = j.value("minibatch", t.minibatch);
  t.entropy_coef = j.value("entropy_coef", t.entropy_coef);
  t.value_coef = j.value("value_coef", t.value_coef);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.episodes_per_update = j.value("episodes_per_update", t.episodes_per_update);
  t.total_updates = j.value("total_updates", t.total_updates);
  t.co_train = j.value("co_train", t.co_train);
}

void parse_policy(const json& j, PolicyConfig& p) {
  p.embed_dim = j.value("embed_dim", p.embed_dim);
  p.pi1_hidden = j.value("pi1_hidden", p.pi1_hidden);
  p.conv1_channels = j.value("conv1_channels", p.conv1_channels);
  p.conv2_channels = j.value("conv2_channels", p.conv2_channels);
  p.trunk_hidden = j.value("trunk_hidden", p.trunk_hidden);
}

void parse_forest(const json& j, ForestParams& f) {
  f.n_trees = j.value("n_trees", f.n_trees);
  f.max_depth = j.value("max_depth", f.max_depth);
  f.min_leaf = j.value("min_leaf", f.min_leaf);
  f.features_per_split = j.value("features_per_split", f.features_per_split);
}

void parse_profile(const json& j, ActivityProfile& p) {
  if (j.contains("rates")) {
    auto r = j.at("rates").get<std::vector<double>>();
    if (r.size() != kNumActivityKinds)
      throw std::invalid_argument("profile rates must have 4 entries (tweet,retweet,reply,mention)");
    std::copy(r.begin(), r.end(), p.rates.begin());
  }
  p.mention_target_pool = j.value("mention_target_pool", p.mention_target_pool);
  p.rate_jitter = j.value("rate_jitter", p.rate_jitter);
}

}  // namespace

HarnessConfig HarnessConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  HarnessConfig c;
  // profile defaults: humans tweet-heavy with diverse mentions, bots bursty
  c.human_profile.rates = {0.6, 0.08, 0.10, 0.05};
  c.human_profile.mention_target_pool = 50;
  c.bot_profile.rates = {0.15, 0.55, 0.25, 0.20};
  c.bot_profile.mention_target_pool = 4;

  if (j.contains("graph")) parse_graph(j["graph"], c.graph);
  if (j.contains("node2vec")) parse_n2v(j["node2vec"], c.n2v);
  if (j.contains("env")) parse_env(j["env"], c.env);
  if (j.contains("train")) parse_train(j["train"], c.train);
  if (j.contains("policy")) parse_policy(j["policy"], c.policy);
  if (j.contains("forest")) parse_forest(j["forest"], c.forest);
  if (j.contains("human_profile")) parse_profile(j["human_profile"], c.human_profile);
  if (j.contains("bot_profile")) parse_profile(j["bot_profile"], c.bot_profile);
  c.corpus_per_class = j.value("corpus_per_class", c.corpus_per_class);
  c.corpus_episode_length = j.value("corpus_episode_length", c.corpus_episode_length);
  if (j.contains("eval_p")) c.eval_p = j["eval_p"].get<std::vector<double>>();
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.n_test_graphs = j.value("n_test_graphs", c.n_test_graphs);
  c.n_sims_metrics = j.value("n_sims_metrics", c.n_sims_metrics);
  c.eval_horizon_multiplier = j.value("eval_horizon_multiplier", c.eval_horizon_multiplier);
  c.celf_sims = j.value("celf_sims", c.celf_sims);
  if (j.contains("budget_checkpoints"))
    c.budget_checkpoints = j["budget_checkpoints"].get<std::vector<double>>();
  c.graphs_dir = j.value("graphs_dir", c.graphs_dir);
  c.out_dir = j.value("out_dir", c.out_dir);

  if (c.seeds.empty()) throw std::invalid_argument("config: seeds list must be nonempty");
  for (double p : c.eval_p)
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("config: eval p values must lie in [0,1]");
  c.policy.embed_dim = c.n2v.dim;
  return c;
}

HarnessConfig HarnessConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string HarnessConfig::to_json_text() const {
  json j;
  j["graph"] = {{"communities_min", graph.communities_min},
                {"communities_max", graph.communities_max},
                {"size_min", graph.size_min},
                {"size_max", graph.size_max},
                {"p_intra", graph.p_intra},
                {"p_inter", graph.p_inter}};
  j["node2vec"] = {{"dim", n2v.dim},
                   {"walks_per_node", n2v.walks_per_node},
                   {"walk_length", n2v.walk_length},
                   {"return_p", n2v.return_p},
                   {"inout_q", n2v.inout_q},
                   {"window", n2v.window},
                   {"negatives", n2v.negatives},
                   {"epochs", n2v.epochs},
                   {"learning_rate", n2v.learning_rate}};
  j["env"] = {{"K", env.K}, {"Q", env.Q}, {"T", env.T}, {"p", env.p},
              {"n_sims_reward", env.n_sims_reward}};
  j["train"] = {{"clip_eps", train.clip_eps},
                {"gae_lambda", train.gae_lambda},
                {"gamma_step", train.gamma_step},
                {"gamma_delayed", train.gamma_delayed},
                {"epochs", train.epochs},
                {"minibatch", train.minibatch},
                {"entropy_coef", train.entropy_coef},
                {"value_coef", train.value_coef},
                {"learning_rate", train.learning_rate},
                {"episodes_per_update", train.episodes_per_update},
                {"total_updates", train.total_updates},
                {"co_train", train.co_train}};
  j["policy"] = {{"embed_dim", policy.embed_dim},
                 {"pi1_hidden", policy.pi1_hidden},
                 {"conv1_channels", policy.conv1_channels},
                 {"conv2_channels", policy.conv2_channels},
                 {"trunk_hidden", policy.trunk_hidden}};
  j["forest"] = {{"n_trees", forest.n_trees},
                 {"max_depth", forest.max_depth},
                 {"min_leaf", forest.min_leaf},
                 {"features_per_split", forest.features_per_split}};
  j["human_profile"] = {{"rates", human_profile.rates},
                        {"mention_target_pool", human_profile.mention_target_pool},
                        {"rate_jitter", human_profile.rate_jitter}};
  j["bot_profile"] = {{"rates", bot_profile.rates},
                      {"mention_target_pool", bot_profile.mention_target_pool},
                      {"rate_jitter", bot_profile.rate_jitter}};
  j["corpus_per_class"] = corpus_per_class;
  j["corpus_episode_length"] = corpus_episode_length;
  j["eval_p"] = eval_p;
  j["seeds"] = seeds;
  j["eval_episodes"] = eval_episodes;
  j["n_test_graphs"] = n_test_graphs;
  j["n_sims_metrics"] = n_sims_metrics;
  j["eval_horizon_multiplier"] = eval_horizon_multiplier;
  j["celf_sims"] = celf_sims;
  j["budget_checkpoints"] = budget_checkpoints;
  j["graphs_dir"] = graphs_dir;
  j["out_dir"] = out_dir;
  return j.dump(2);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Acorn: return "ACORN";
    case Method::AgentIH: return "AgentI+H";
    case Method::AgentIC: return "AgentI+C";
    case Method::AgentIStarH: return "AgentI*+H";
    case Method::AgentIStarC: return "AgentI*+C";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  for (Method m : {Method::Acorn, Method::AgentIH, Method::AgentIC, Method::AgentIStarH,
                   Method::AgentIStarC})
    if (name == method_name(m)) return m;
  return std::nullopt;
}

std::vector<TestInstance> make_test_instances(const HarnessConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TestInstance> out;
  std::vector<std::shared_ptr<SocialGraph>> graphs;
  if (!cfg.graphs_dir.empty()) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(cfg.graphs_dir))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw std::runtime_error("no .txt edge lists under " + cfg.graphs_dir);
    for (const auto& f : files) {
      std::ifstream in(f);
      if (!in) throw std::runtime_error("cannot open " + f.string());
      graphs.push_back(std::make_shared<SocialGraph>(load_edge_list(in).graph));
    }
  } else {
    for (int i = 0; i < cfg.n_test_graphs; ++i) {
      auto cc = sample_community_config(cfg.graph, rng);
      graphs.push_back(std::make_shared<SocialGraph>(generate_synthetic(cc)));
    }
  }
  for (auto& g : graphs) {
    Node2VecParams n2v = cfg.n2v;
    n2v.rng_seed = rng();
    auto emb = std::make_shared<EmbeddingMatrix>(node2vec_embed(*g, n2v));
    out.push_back({std::move(g), std::move(emb)});
  }
  return out;
}

EvalEpisodeRow run_instrumented_episode(Method method, const TestInstance& instance,
                                        const RandomForest& detector, const HarnessConfig& cfg,
                                        double p, PolicyBundle& acorn, PolicyBundle* agent1_star,
                                        std::uint64_t seed, std::ostream* trace) {
  const SocialGraph& g = *instance.graph;
  const NodeId n = g.n_nodes();

  EnvConfig env_cfg = cfg.env;
  env_cfg.p = p;
  env_cfg.T = std::max(cfg.env.T, static_cast<int>(cfg.eval_horizon_multiplier * n));
  env_cfg.rng_seed = seed;
  Env env(g, detector, *instance.embeddings, env_cfg);

  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);

  Pi1Net* pi1 = &acorn.pi1;
  if (method == Method::AgentIStarH || method == Method::AgentIStarC) {
    if (!agent1_star) throw std::invalid_argument("AgentI* methods require the ablation bundle");
    pi1 = &agent1_star->pi1;
  }

  std::unique_ptr<SpreadEstimator> estimator;
  std::unique_ptr<Selector> selector;
  if (method == Method::AgentIH || method == Method::AgentIStarH) {
    selector = std::make_unique<Selector>(SelectorKind::Degree, g, p, nullptr);
  } else if (method == Method::AgentIC || method == Method::AgentIStarC) {
    if (g.n_edges() <= kExactSpreadMaxEdges)
      estimator = std::make_unique<ExactEstimator>();
    else
      estimator = std::make_unique<MonteCarloEstimator>(cfg.celf_sims, seed);
    selector = std::make_unique<Selector>(SelectorKind::Celf, g, p, estimator.get());
  }

  EvalEpisodeRow row;
  row.method = method;
  row.p = p;
  row.seed = seed;

  std::size_t next_checkpoint = 0;
  auto maybe_checkpoint = [&]() {
    while (next_checkpoint < cfg.budget_checkpoints.size() &&
           static_cast<double>(env.followers().size()) >=
               cfg.budget_checkpoints[next_checkpoint] * n - 1e-9) {
      double sigma = spread(g, env.followers(), p, cfg.n_sims_metrics, seed + next_checkpoint).mean;
      row.checkpoints.push_back({cfg.budget_checkpoints[next_checkpoint],
                                 static_cast<long>(env.sequence().size()), sigma / n});
      ++next_checkpoint;
    }
  };

  while (!env.terminated()) {
    auto logits = pi1->forward(pi1_features(env.observe_i(), n));
    auto probs = nn::masked_softmax(logits, {});
    auto kind = static_cast<ActivityKind>(nn::categorical_sample(probs, rng));
    StepOutcome out = env.step_activity(kind);
    if (out.follower_phase_requested) {
      ObservationII obs = env.observe_ii();
      NodeId node;
      if (method == Method::Acorn) {
        auto logits2 = acorn.pi2.forward(pi2_node_features(obs), obs.activity);
        auto probs2 = nn::masked_softmax(logits2, obs.mask);
        node = static_cast<NodeId>(nn::categorical_sample(probs2, rng));
      } else {
        node = selector->next_node(obs.mask);
      }
      env.step_follower(node);
      maybe_checkpoint();
    }
  }

  if (trace) write_trace_jsonl(env, *trace);
  EpisodeRecord rec = make_episode_record(env);
  row.survival_steps = static_cast<long>(rec.seq_length);
  row.survived_intervals = rec.survived_intervals;
  row.objective = rec.objective;
  row.reason = rec.reason;
  row.selections = rec.selections;
  double sigma_final = spread(g, env.followers(), p, cfg.n_sims_metrics, seed ^ 0xabcdefULL).mean;
  row.influence_ratio = n > 0 ? sigma_final / n : 0.0;
  return row;
}

std::vector<MetricsRow> aggregate_metrics(const std::vector<EvalEpisodeRow>& rows) {
  std::map<std::pair<std::string, double>, std::vector<const EvalEpisodeRow*>> cells;
  for (const auto& r : rows) cells[{method_name(r.method), r.p}].push_back(&r);
  std::vector<MetricsRow> out;
  for (const auto& [key, cell] : cells) {
    std::vector<double> ratios, steps;
    for (const auto* r : cell) {
      ratios.push_back(r->influence_ratio);
      steps.push_back(static_cast<double>(r->survival_steps));
    }
    MetricsRow m;
    m.method = key.first;
    m.p = key.second;
    auto [rm, rs] = mean_std(ratios);
    auto [sm, ss] = mean_std(steps);
    m.influence_ratio_mean = rm;
    m.influence_ratio_std = rs;
    m.survival_mean = sm;
    m.survival_std = ss;
    m.episodes = static_cast<int>(cell.size());
    out.push_back(std::move(m));
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "schema_version,method,p,episodes,influence_ratio_mean,influence_ratio_std,"
         "survival_steps_mean,survival_steps_std\n";
  for (const auto& r : rows)
    out << "1," << r.method << "," << r.p << "," << r.episodes << "," << r.influence_ratio_mean
        << "," << r.influence_ratio_std << "," << r.survival_mean << "," << r.survival_std << "\n";
}

void write_episode_csv(const std::vector<EvalEpisodeRow>& rows, std::ostream& out) {
  out << "schema_version,method,p,seed,graph_index,episode,influence_ratio,survival_steps,"
         "survived_intervals,objective,reason\n";
  for (const auto& r : rows)
    out << "1," << method_name(r.method) << "," << r.p << "," << r.seed << "," << r.graph_index
        << "," << r.episode << "," << r.influence_ratio << "," << r.survival_steps << ","
        << r.survived_intervals << "," << r.objective << "," << terminal_reason_name(r.reason)
        << "\n";
}

void write_checkpoint_csv(const std::vector<EvalEpisodeRow>& rows, std::ostream& out) {
  out << "schema_version,method,p,seed,graph_index,episode,budget_frac,steps_at,influence_ratio\n";
  for (const auto& r : rows)
    for (const auto& c : r.checkpoints)
      out << "1," << method_name(r.method) << "," << r.p << "," << r.seed << "," << r.graph_index
          << "," << r.episode << "," << c.budget_frac << "," << c.steps_at << ","
          << c.influence_ratio << "\n";
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(var / static_cast<double>(xs.size() - 1));
  }
  return s;
}

double mann_whitney_one_sided_p(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  if (na == 0 || nb == 0) throw std::invalid_argument("mann-whitney: empty sample");
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(na + nb);
  for (double x : a) pooled.emplace_back(x, 0);
  for (double x : b) pooled.emplace_back(x, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) rank_sum_a += avg_rank;
    i = j;
  }
  const double n = static_cast<double>(na + nb);
  const double u = rank_sum_a - static_cast<double>(na) * (na + 1) / 2.0;
  const double mu = static_cast<double>(na) * nb / 2.0;
  double var = static_cast<double>(na) * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return u > mu ? 0.0 : 1.0;  // all values tied
  const double z = (u - mu - 0.5) / std::sqrt(var);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace asl::harness
