// Command-line front end: graph generation, embedding, detector and policy
// training, evaluation, benchmarks, and the end-to-end pipeline.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asl/baselines.hpp"
#include "asl/detector.hpp"
#include "asl/diffusion.hpp"
#include "asl/env.hpp"
#include "asl/graph.hpp"
#include "asl/harness.hpp"
#include "asl/node2vec.hpp"
#include "asl/policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace asl;
using namespace asl::harness;

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 1;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON configuration file");
  cmd->add_option("--seed", c.seed, "master random seed");
  cmd->add_option("--out", c.out, "output directory (overrides config out_dir)");
  cmd->add_flag("--dry-run", c.dry_run, "print the resolved plan without writing anything");
}

HarnessConfig resolve_config(const Common& c) {
  HarnessConfig cfg = c.config_path.empty() ? HarnessConfig::from_json_text("{}")
                                            : HarnessConfig::from_file(c.config_path);
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

void echo_resolved(const HarnessConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(fs::path(cfg.out_dir) / "resolved_config.json");
  out << cfg.to_json_text() << "\n";
}

RandomForest load_detector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open detector file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return RandomForest::from_json(ss.str());
}

RandomForest train_detector_stage(const HarnessConfig& cfg, std::uint64_t seed,
                                  ClassifierScores* scores_out) {
  Dataset corpus = generate_labeled_corpus(cfg.human_profile, cfg.bot_profile,
                                           cfg.corpus_per_class, cfg.corpus_episode_length, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(corpus.begin(), corpus.end(), rng);
  std::size_t split = corpus.size() * 4 / 5;
  Dataset train_set(corpus.begin(), corpus.begin() + split);
  Dataset test_set(corpus.begin() + split, corpus.end());
  ForestParams fp = cfg.forest;
  fp.rng_seed = seed;
  RandomForest forest = RandomForest::train(train_set, fp);
  if (scores_out) *scores_out = evaluate_classifier(forest, test_set);
  return forest;
}

EpisodeFactory make_factory(const HarnessConfig& cfg, const RandomForest& detector) {
  EpisodeFactory f;
  f.make_graph = [cfg](std::mt19937_64& rng) {
    auto cc = sample_community_config(cfg.graph, rng);
    return std::make_shared<const SocialGraph>(generate_synthetic(cc));
  };
  f.make_embeddings = [cfg](const SocialGraph& g, std::mt19937_64& rng) {
    Node2VecParams n2v = cfg.n2v;
    n2v.rng_seed = rng();
    return std::make_shared<const EmbeddingMatrix>(node2vec_embed(g, n2v));
  };
  f.detector = &detector;
  f.env_cfg = cfg.env;
  return f;
}

void write_curve_csv(const TrainResult& result, std::ostream& out) {
  out << "schema_version,update,mean_objective,mean_survived_intervals,mean_influence_ratio,"
         "mean_seq_length\n";
  for (const auto& u : result.curve)
    out << "1," << u.update << "," << u.mean_objective << "," << u.mean_survived_intervals << ","
        << u.mean_influence_ratio << "," << u.mean_seq_length << "\n";
}

PolicyBundle train_stage(const HarnessConfig& cfg, const RandomForest& detector,
                         std::uint64_t seed, bool co_train, const fs::path& out_dir) {
  PolicyConfig pc = cfg.policy;
  pc.init_seed = seed;
  PolicyBundle bundle(pc);
  TrainConfig tc = cfg.train;
  tc.rng_seed = seed;
  tc.co_train = co_train;
  TrainResult result = train(bundle, make_factory(cfg, detector), tc, [](const UpdateStats& u) {
    std::cerr << "update " << u.update << " objective " << u.mean_objective << " intervals "
              << u.mean_survived_intervals << "\n";
  });
  fs::create_directories(out_dir);
  bundle.save(out_dir.string());
  std::ofstream curve(out_dir / "curve.csv");
  write_curve_csv(result, curve);
  return bundle;
}

void write_selections_csv(const std::vector<EvalEpisodeRow>& rows, std::ostream& out) {
  out << "schema_version,method,p,seed,graph_index,episode,selection_index,node,out_degree\n";
  for (const auto& r : rows) {
    int idx = 0;
    for (const auto& [node, deg] : r.selections)
      out << "1," << method_name(r.method) << "," << r.p << "," << r.seed << "," << r.graph_index
          << "," << r.episode << "," << idx++ << "," << node << "," << deg << "\n";
  }
}

std::vector<Method> parse_methods(const std::string& csv) {
  std::vector<Method> out;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    auto m = method_from_name(token);
    if (!m) throw std::invalid_argument("unknown method: " + token);
    out.push_back(*m);
  }
  if (out.empty()) throw std::invalid_argument("method list is empty");
  return out;
}

std::vector<EvalEpisodeRow> run_eval_cells(const HarnessConfig& cfg,
                                           const std::vector<TestInstance>& instances,
                                           const RandomForest& detector,
                                           const std::vector<Method>& methods,
                                           PolicyBundle& acorn, PolicyBundle* star,
                                           std::ostream* traces) {
  std::vector<EvalEpisodeRow> rows;
  for (Method m : methods) {
    for (double p : cfg.eval_p) {
      for (std::uint64_t s : cfg.seeds) {
        for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
          int gi = static_cast<int>((s + ep) % instances.size());
          std::uint64_t ep_seed =
              s * 1000003ULL + static_cast<std::uint64_t>(ep) * 7919ULL +
              static_cast<std::uint64_t>(m) * 131ULL + static_cast<std::uint64_t>(p * 1000);
          bool first_in_cell = ep == 0;
          EvalEpisodeRow row =
              run_instrumented_episode(m, instances[gi], detector, cfg, p, acorn, star, ep_seed,
                                       first_in_cell ? traces : nullptr);
          row.graph_index = gi;
          row.episode = ep;
          row.seed = s;
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

void write_eval_outputs(const HarnessConfig& cfg, const std::vector<EvalEpisodeRow>& rows) {
  fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  auto metrics = aggregate_metrics(rows);
  {
    std::ofstream out(out_dir / "metrics.csv");
    write_metrics_csv(metrics, out);
  }
  {
    std::ofstream out(out_dir / "episodes.csv");
    write_episode_csv(rows, out);
  }
  {
    std::ofstream out(out_dir / "checkpoints.csv");
    write_checkpoint_csv(rows, out);
  }
  {
    std::ofstream out(out_dir / "selections.csv");
    write_selections_csv(rows, out);
  }
  json summary = json::array();
  for (const auto& m : metrics)
    summary.push_back({{"method", m.method},
                       {"p", m.p},
                       {"episodes", m.episodes},
                       {"influence_ratio_mean", m.influence_ratio_mean},
                       {"influence_ratio_std", m.influence_ratio_std},
                       {"survival_steps_mean", m.survival_mean},
                       {"survival_steps_std", m.survival_std}});
  std::ofstream sj(out_dir / "summary.json");
  sj << summary.dump(2) << "\n";
}

int cmd_gen_graph(const Common& c) {
  HarnessConfig cfg = resolve_config(c);
  if (c.dry_run) {
    std::cout << "would generate " << cfg.n_test_graphs << " synthetic graphs under "
              << cfg.out_dir << "/graphs\n";
    return 0;
  }
  echo_resolved(cfg);
  fs::path dir = fs::path(cfg.out_dir) / "graphs";
  fs::create_directories(dir);
  std::mt19937_64 rng(c.seed);
  json manifest = json::array();
  for (int i = 0; i < cfg.n_test_graphs; ++i) {
    auto cc = sample_community_config(cfg.graph, rng);
    SocialGraph g = generate_synthetic(cc);
    char name[32];
    std::snprintf(name, sizeof name, "graph_%03d.txt", i);
    std::ofstream out(dir / name);
    save_edge_list(g, out);
    manifest.push_back({{"file", name}, {"nodes", g.n_nodes()}, {"edges", g.n_edges()}});
  }
  std::ofstream mj(dir / "manifest.json");
  mj << manifest.dump(2) << "\n";
  std::cout << "wrote " << cfg.n_test_graphs << " graphs to " << dir.string() << "\n";
  return 0;
}

int cmd_embed(const Common& c) {
  HarnessConfig cfg = resolve_config(c);
  if (c.dry_run) {
    std::cout << "would embed " << (cfg.graphs_dir.empty() ? "synthetic" : cfg.graphs_dir)
              << " graphs into " << cfg.n2v.dim << "-d vectors under " << cfg.out_dir << "\n";
    return 0;
  }
  echo_resolved(cfg);
  auto instances = make_test_instances(cfg, c.seed);
  fs::path dir = fs::path(cfg.out_dir) / "embeddings";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    char bin_name[48], csv_name[48];
    std::snprintf(bin_name, sizeof bin_name, "embeddings_%03zu.bin", i);
    std::snprintf(csv_name, sizeof csv_name, "embeddings_%03zu.csv", i);
    {
      std::ofstream out(dir / bin_name, std::ios::binary);
      save_embeddings_binary(*instances[i].embeddings, out);
    }
    std::ofstream out(dir / csv_name);
    save_embeddings_csv(*instances[i].embeddings, out);
  }
  std::cout << "wrote embeddings for " << instances.size() << " graphs to " << dir.string()
            << "\n";
  return 0;
}

int cmd_train_detector(const Common& c) {
  HarnessConfig cfg = resolve_config(c);
  if (c.dry_run) {
    std::cout << "would train a " << cfg.forest.n_trees << "-tree forest on "
              << 2 * cfg.corpus_per_class << " synthetic accounts, writing " << cfg.out_dir
              << "/forest.json\n";
    return 0;
  }
  echo_resolved(cfg);
  ClassifierScores scores;
  RandomForest forest = train_detector_stage(cfg, c.seed, &scores);
  fs::path out_dir(cfg.out_dir);
  {
    std::ofstream out(out_dir / "forest.json");
    out << forest.to_json() << "\n";
  }
  Dataset corpus = generate_labeled_corpus(cfg.human_profile, cfg.bot_profile,
                                           cfg.corpus_per_class, cfg.corpus_episode_length,
                                           c.seed);
  {
    std::ofstream out(out_dir / "corpus.csv");
    save_labeled_csv(corpus, out);
  }
  json sj = {{"accuracy", scores.accuracy},
             {"precision", scores.precision},
             {"recall", scores.recall},
             {"f1", scores.f1}};
  std::ofstream out(out_dir / "detector_scores.json");
  out << sj.dump(2) << "\n";
  std::cout << "detector holdout f1=" << scores.f1 << " accuracy=" << scores.accuracy << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& detector_path, bool ablation) {
  HarnessConfig cfg = resolve_config(c);
  std::string det = detector_path.empty()
                        ? (fs::path(cfg.out_dir) / "forest.json").string()
                        : detector_path;
  if (c.dry_run) {
    std::cout << "would train " << (ablation ? "the follower-ablated policy" : "both policies")
              << " for " << cfg.train.total_updates << " updates using detector " << det << "\n";
    return 0;
  }
  echo_resolved(cfg);
  RandomForest forest = load_detector(det);
  fs::path dir = fs::path(cfg.out_dir) / (ablation ? "bundle_star" : "bundle");
  train_stage(cfg, forest, c.seed, !ablation, dir);
  std::cout << "saved policy bundle to " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& detector_path, const std::string& bundle_dir,
             const std::string& star_dir, const std::string& methods_csv) {
  HarnessConfig cfg = resolve_config(c);
  auto methods = parse_methods(methods_csv);
  if (c.dry_run) {
    std::cout << "would evaluate " << methods.size() << " methods x " << cfg.eval_p.size()
              << " p values x " << cfg.seeds.size() << " seeds x " << cfg.eval_episodes
              << " episodes on " << cfg.n_test_graphs << " test graphs\n";
    return 0;
  }
  echo_resolved(cfg);
  if (cfg.eval_episodes == 0) {
    std::cerr << "warning: zero episodes requested; writing empty tables\n";
    write_eval_outputs(cfg, {});
    return 0;
  }
  std::string det = detector_path.empty()
                        ? (fs::path(cfg.out_dir) / "forest.json").string()
                        : detector_path;
  RandomForest forest = load_detector(det);
  std::string bdir = bundle_dir.empty() ? (fs::path(cfg.out_dir) / "bundle").string() : bundle_dir;
  PolicyBundle acorn = PolicyBundle::load(bdir);
  std::optional<PolicyBundle> star;
  bool wants_star = std::any_of(methods.begin(), methods.end(), [](Method m) {
    return m == Method::AgentIStarH || m == Method::AgentIStarC;
  });
  if (wants_star) {
    std::string sdir =
        star_dir.empty() ? (fs::path(cfg.out_dir) / "bundle_star").string() : star_dir;
    star = PolicyBundle::load(sdir);
  }
  auto instances = make_test_instances(cfg, c.seed);
  std::ofstream traces(fs::path(cfg.out_dir) / "traces.jsonl");
  auto rows = run_eval_cells(cfg, instances, forest, methods, acorn,
                             star ? &*star : nullptr, &traces);
  write_eval_outputs(cfg, rows);
  std::cout << "evaluated " << rows.size() << " episodes; tables in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_bench_runtime(const Common& c, const std::string& bundle_dir, int budget) {
  HarnessConfig cfg = resolve_config(c);
  if (c.dry_run) {
    std::cout << "would time per-selection cost of the follower policy vs lazy greedy for p in "
              << cfg.eval_p.size() << " settings\n";
    return 0;
  }
  echo_resolved(cfg);
  std::mt19937_64 rng(c.seed);
  auto cc = sample_community_config(cfg.graph, rng);
  SocialGraph g = generate_synthetic(cc);
  Node2VecParams n2v = cfg.n2v;
  n2v.rng_seed = rng();
  EmbeddingMatrix emb = node2vec_embed(g, n2v);
  const NodeId n = g.n_nodes();
  if (budget < 0 || budget > n) budget = n;

  std::optional<PolicyBundle> bundle;
  if (!bundle_dir.empty()) bundle = PolicyBundle::load(bundle_dir);
  else bundle.emplace(cfg.policy);  // freshly initialized net; timing is architecture-bound

  std::ofstream out(fs::path(cfg.out_dir) / "bench_runtime.csv");
  out << "schema_version,method,p,selection_index,budget_so_far,seconds\n";
  using clock = std::chrono::steady_clock;
  for (double p : cfg.eval_p) {
    {  // follower policy: one forward pass + argmax per selection
      std::vector<std::uint8_t> mask(n, 1);
      std::vector<double> membership(n);
      std::vector<NodeId> acquired;
      for (int s = 0; s < budget; ++s) {
        for (NodeId u = 0; u < n; ++u)
          membership[u] = mask[u] ? (1.0 + acquired.size()) /
                                        (1.0 + static_cast<double>(g.out_degree(u)))
                                  : 0.0;
        for (double& m : membership) m = std::min(1.0, std::max(0.0, m));
        ObservationII obs;
        obs.embeddings = &emb;
        obs.activity = {0.25, 0.25, 0.25, 0.25};
        obs.membership = membership;
        obs.mask = mask;
        auto t0 = clock::now();
        auto logits = bundle->pi2.forward(pi2_node_features(obs), obs.activity);
        auto probs = nn::masked_softmax(logits, obs.mask);
        NodeId pick = static_cast<NodeId>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        auto dt = std::chrono::duration<double>(clock::now() - t0).count();
        out << "1,AgentII," << p << "," << s << "," << acquired.size() << "," << dt << "\n";
        mask[pick] = 0;
        acquired.push_back(pick);
      }
    }
    {
      MonteCarloEstimator estimator(cfg.celf_sims, c.seed);
      Selector selector(SelectorKind::Celf, g, p, &estimator);
      std::vector<std::uint8_t> mask(n, 1);
      for (int s = 0; s < budget; ++s) {
        auto t0 = clock::now();
        NodeId pick = selector.next_node(mask);
        auto dt = std::chrono::duration<double>(clock::now() - t0).count();
        out << "1,CELF," << p << "," << s << "," << s << "," << dt << "\n";
        mask[pick] = 0;
      }
    }
  }
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "bench_runtime.csv").string() << "\n";
  return 0;
}

int cmd_multibot(const Common& c, const std::string& detector_path,
                 const std::string& bundle_dir) {
  HarnessConfig cfg = resolve_config(c);
  if (c.dry_run) {
    std::cout << "would run one environment per sub-graph (" << cfg.n_test_graphs
              << " graphs) and aggregate influence\n";
    return 0;
  }
  echo_resolved(cfg);
  std::string det = detector_path.empty()
                        ? (fs::path(cfg.out_dir) / "forest.json").string()
                        : detector_path;
  RandomForest forest = load_detector(det);
  std::string bdir = bundle_dir.empty() ? (fs::path(cfg.out_dir) / "bundle").string() : bundle_dir;
  PolicyBundle acorn = PolicyBundle::load(bdir);
  auto instances = make_test_instances(cfg, c.seed);
  if (instances.empty()) throw std::runtime_error("multibot: empty graph list");

  std::ofstream rows_out(fs::path(cfg.out_dir) / "multibot.csv");
  rows_out << "schema_version,p,seed,graph_index,nodes,influence_ratio,survival_steps,"
              "survived_intervals\n";
  json summary = json::array();
  for (double p : cfg.eval_p) {
    for (std::uint64_t s : cfg.seeds) {
      double sigma_total = 0.0;
      long nodes_total = 0;
      for (std::size_t gi = 0; gi < instances.size(); ++gi) {
        std::uint64_t ep_seed = s * 1000003ULL + gi * 7919ULL + static_cast<std::uint64_t>(p * 1000);
        EvalEpisodeRow row = run_instrumented_episode(Method::Acorn, instances[gi], forest, cfg, p,
                                                      acorn, nullptr, ep_seed);
        NodeId n = instances[gi].graph->n_nodes();
        sigma_total += row.influence_ratio * n;
        nodes_total += n;
        rows_out << "1," << p << "," << s << "," << gi << "," << n << "," << row.influence_ratio
                 << "," << row.survival_steps << "," << row.survived_intervals << "\n";
      }
      summary.push_back({{"p", p},
                         {"seed", s},
                         {"graphs", instances.size()},
                         {"aggregate_influence_ratio", sigma_total / nodes_total}});
    }
  }
  std::ofstream sj(fs::path(cfg.out_dir) / "multibot_summary.json");
  sj << summary.dump(2) << "\n";
  std::cout << "wrote multibot tables to " << cfg.out_dir << "\n";
  return 0;
}

struct SelectionRow {
  std::string method;
  double p;
  int selection_index;
  NodeId node;
  NodeId out_degree;
};

int cmd_insights(const Common& c, const std::string& in_path) {
  HarnessConfig cfg = resolve_config(c);
  std::string path =
      in_path.empty() ? (fs::path(cfg.out_dir) / "selections.csv").string() : in_path;
  if (c.dry_run) {
    std::cout << "would summarize selected-node degrees from " << path << "\n";
    return 0;
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open selections file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<SelectionRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw std::runtime_error("selections row needs 9 columns: " + line);
    rows.push_back({cells[1], std::stod(cells[2]), std::stoi(cells[6]),
                    static_cast<NodeId>(std::stol(cells[7])),
                    static_cast<NodeId>(std::stol(cells[8]))});
  }
  fs::create_directories(cfg.out_dir);

  // degree histogram per method (power-of-two buckets)
  std::map<std::pair<std::string, int>, long> hist;
  std::map<std::string, std::vector<std::pair<int, NodeId>>> by_method;
  for (const auto& r : rows) {
    int bucket = 0;
    while ((1 << (bucket + 1)) <= r.out_degree + 1) ++bucket;
    ++hist[{r.method, bucket}];
    by_method[r.method].push_back({r.selection_index, r.out_degree});
  }
  {
    std::ofstream out(fs::path(cfg.out_dir) / "degree_histogram.csv");
    out << "schema_version,method,degree_bucket_low,degree_bucket_high,count\n";
    for (const auto& [key, count] : hist)
      out << "1," << key.first << "," << ((1 << key.second) - 1) << ","
          << ((1 << (key.second + 1)) - 2) << "," << count << "\n";
  }
  json summary = json::array();
  for (auto& [method, sel] : by_method) {
    std::sort(sel.begin(), sel.end());
    std::size_t head = std::max<std::size_t>(1, sel.size() / 10);
    std::vector<NodeId> degs;
    for (std::size_t i = 0; i < head; ++i) degs.push_back(sel[i].second);
    std::sort(degs.begin(), degs.end());
    double median = degs.size() % 2 ? degs[degs.size() / 2]
                                    : 0.5 * (degs[degs.size() / 2 - 1] + degs[degs.size() / 2]);
    summary.push_back({{"method", method},
                       {"selections", sel.size()},
                       {"median_degree_first_decile", median}});
  }
  std::ofstream sj(fs::path(cfg.out_dir) / "insights_summary.json");
  sj << summary.dump(2) << "\n";
  std::cout << "report rows: " << rows.size() << "\n";
  return 0;
}

int cmd_pipeline(const Common& c, const std::string& methods_csv) {
  HarnessConfig cfg = resolve_config(c);
  auto methods = parse_methods(methods_csv);
  bool wants_star = std::any_of(methods.begin(), methods.end(), [](Method m) {
    return m == Method::AgentIStarH || m == Method::AgentIStarC;
  });
  fs::path out_dir(cfg.out_dir);
  fs::path forest_path = out_dir / "forest.json";
  fs::path bundle_dir = out_dir / "bundle";
  fs::path star_dir = out_dir / "bundle_star";

  if (c.dry_run) {
    std::cout << "pipeline plan (out=" << cfg.out_dir << "):\n"
              << "  1. train-detector -> forest.json"
              << (fs::exists(forest_path) ? " [exists, would skip]" : "") << "\n"
              << "  2. train          -> bundle/"
              << (fs::exists(bundle_dir / "manifest.json") ? " [exists, would skip]" : "") << "\n";
    if (wants_star)
      std::cout << "  3. train ablated  -> bundle_star/"
                << (fs::exists(star_dir / "manifest.json") ? " [exists, would skip]" : "") << "\n";
    std::cout << "  " << (wants_star ? 4 : 3) << ". eval + insights -> metrics tables\n"
              << cfg.to_json_text() << "\n";
    return 0;
  }
  echo_resolved(cfg);

  auto stage = [](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
    }
  };

  json manifest = json::array();
  stage("detector", [&] {
    if (fs::exists(forest_path)) {
      std::cerr << "detector checkpoint found; skipping training\n";
      return;
    }
    ClassifierScores scores;
    RandomForest forest = train_detector_stage(cfg, c.seed, &scores);
    std::ofstream out(forest_path);
    out << forest.to_json() << "\n";
    std::cerr << "detector holdout f1=" << scores.f1 << "\n";
  });
  manifest.push_back({{"artifact", "forest.json"}, {"stage", "detector"}});

  RandomForest forest = load_detector(forest_path.string());
  stage("train", [&] {
    if (fs::exists(bundle_dir / "manifest.json")) {
      std::cerr << "policy checkpoint found; skipping training\n";
      return;
    }
    train_stage(cfg, forest, c.seed, true, bundle_dir);
  });
  manifest.push_back({{"artifact", "bundle/"}, {"stage", "train"}});

  if (wants_star) {
    stage("train-ablated", [&] {
      if (fs::exists(star_dir / "manifest.json")) {
        std::cerr << "ablated checkpoint found; skipping training\n";
        return;
      }
      train_stage(cfg, forest, c.seed + 1, false, star_dir);
    });
    manifest.push_back({{"artifact", "bundle_star/"}, {"stage", "train-ablated"}});
  }

  stage("eval", [&] {
    PolicyBundle acorn = PolicyBundle::load(bundle_dir.string());
    std::optional<PolicyBundle> star;
    if (wants_star) star = PolicyBundle::load(star_dir.string());
    auto instances = make_test_instances(cfg, c.seed);
    std::ofstream traces(out_dir / "traces.jsonl");
    auto rows = run_eval_cells(cfg, instances, forest, methods, acorn,
                               star ? &*star : nullptr, &traces);
    write_eval_outputs(cfg, rows);
  });
  for (const char* f : {"metrics.csv", "episodes.csv", "checkpoints.csv", "selections.csv",
                        "traces.jsonl", "summary.json"})
    manifest.push_back({{"artifact", f}, {"stage", "eval"}});

  stage("insights", [&] {
    Common ic = c;
    ic.dry_run = false;
    cmd_insights(ic, (out_dir / "selections.csv").string());
  });
  manifest.push_back({{"artifact", "degree_histogram.csv"}, {"stage", "insights"}});
  manifest.push_back({{"artifact", "insights_summary.json"}, {"stage", "insights"}});

  std::ofstream mj(out_dir / "manifest.json");
  mj << manifest.dump(2) << "\n";
  std::cout << "pipeline complete; artifacts listed in " << (out_dir / "manifest.json").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influence-maximizing socialbot: training, evaluation, and benchmarks"};
  app.require_subcommand(1);

  Common c_gen, c_embed, c_det, c_train, c_eval, c_bench, c_multi, c_ins, c_pipe;
  std::string det_path, det_path_eval, det_path_multi;
  std::string bundle_dir_eval, bundle_dir_bench, bundle_dir_multi, star_dir_eval;
  std::string methods_eval = "ACORN,AgentI+H,AgentI+C";
  std::string methods_pipe = "ACORN,AgentI+H,AgentI+C";
  std::string insights_in;
  bool ablation = false;
  int bench_budget = -1;

  auto* gen = app.add_subcommand("gen-graph", "generate synthetic test graphs");
  add_common(gen, c_gen);
  auto* embed = app.add_subcommand("embed", "compute node embeddings for the test graphs");
  add_common(embed, c_embed);
  auto* det = app.add_subcommand("train-detector", "train the random-forest bot detector");
  add_common(det, c_det);
  auto* tr = app.add_subcommand("train", "train the hierarchical policy bundle");
  add_common(tr, c_train);
  tr->add_option("--detector", det_path, "trained detector JSON (default <out>/forest.json)");
  tr->add_flag("--ablation", ablation, "train with random follower selection (ablated bundle)");
  auto* ev = app.add_subcommand("eval", "evaluate methods on the test suite");
  add_common(ev, c_eval);
  ev->add_option("--detector", det_path_eval, "trained detector JSON");
  ev->add_option("--bundle", bundle_dir_eval, "policy bundle directory");
  ev->add_option("--bundle-star", star_dir_eval, "ablated bundle directory");
  ev->add_option("--methods", methods_eval, "comma-separated method names");
  auto* bench = app.add_subcommand("bench-runtime", "per-selection timing benchmark");
  add_common(bench, c_bench);
  bench->add_option("--bundle", bundle_dir_bench, "policy bundle directory (optional)");
  bench->add_option("--budget", bench_budget, "selections to time (default: all nodes)");
  auto* multi = app.add_subcommand("multibot", "one bot per sub-graph, aggregated influence");
  add_common(multi, c_multi);
  multi->add_option("--detector", det_path_multi, "trained detector JSON");
  multi->add_option("--bundle", bundle_dir_multi, "policy bundle directory");
  auto* ins = app.add_subcommand("insights", "selected-node degree report");
  add_common(ins, c_ins);
  ins->add_option("--in", insights_in, "selections CSV (default <out>/selections.csv)");
  auto* pipe = app.add_subcommand("pipeline", "detector -> policy -> eval -> reports");
  add_common(pipe, c_pipe);
  pipe->add_option("--methods", methods_pipe, "comma-separated method names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_graph(c_gen);
    if (embed->parsed()) return cmd_embed(c_embed);
    if (det->parsed()) return cmd_train_detector(c_det);
    if (tr->parsed()) return cmd_train(c_train, det_path, ablation);
    if (ev->parsed()) return cmd_eval(c_eval, det_path_eval, bundle_dir_eval, star_dir_eval,
                                      methods_eval);
    if (bench->parsed()) return cmd_bench_runtime(c_bench, bundle_dir_bench, bench_budget);
    if (multi->parsed()) return cmd_multibot(c_multi, det_path_multi, bundle_dir_multi);
    if (ins->parsed()) return cmd_insights(c_ins, insights_in);
    if (pipe->parsed()) return cmd_pipeline(c_pipe, methods_pipe);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
