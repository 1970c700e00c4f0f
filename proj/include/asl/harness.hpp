#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "asl/baselines.hpp"
#include "asl/detector.hpp"
#include "asl/env.hpp"
#include "asl/policy.hpp"

namespace asl::harness {

struct GraphProfile {
  int communities_min = 3;
  int communities_max = 6;
  NodeId size_min = 30;
  NodeId size_max = 60;
  double p_intra = 0.9;
  double p_inter = 0.01;
};

CommunityConfig sample_community_config(const GraphProfile& profile, std::mt19937_64& rng);

/// Resolved experiment configuration; every module default is overridable
/// from a single JSON document.
struct HarnessConfig {
  GraphProfile graph;
  Node2VecParams n2v;
  EnvConfig env;
  TrainConfig train;
  PolicyConfig policy;
  ForestParams forest;
  ActivityProfile human_profile;
  ActivityProfile bot_profile;
  int corpus_per_class = 400;
  int corpus_episode_length = 60;

  std::vector<double> eval_p{0.25, 0.5, 0.75};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int eval_episodes = 20;
  int n_test_graphs = 20;
  int n_sims_metrics = 2000;
  double eval_horizon_multiplier = 50.0;  // evaluation horizon = multiplier * |V|
  int celf_sims = 1000;
  std::vector<double> budget_checkpoints{0.10, 0.25, 0.50, 0.75, 1.00};
  std::string graphs_dir;  // optional: directory of .txt edge lists used instead of synthetic graphs
  std::string out_dir = "out";

  static HarnessConfig from_json_text(const std::string& text);
  static HarnessConfig from_file(const std::string& path);
  std::string to_json_text() const;  // resolved config, echoed for provenance
};

enum class Method { Acorn, AgentIH, AgentIC, AgentIStarH, AgentIStarC };
const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct TestInstance {
  std::shared_ptr<const SocialGraph> graph;
  std::shared_ptr<const EmbeddingMatrix> embeddings;
};

std::vector<TestInstance> make_test_instances(const HarnessConfig& cfg, std::uint64_t seed);

struct CheckpointRow {
  double budget_frac = 0.0;
  long steps_at = -1;            // |A| when |S| first crossed the checkpoint
  double influence_ratio = 0.0;  // sigma_hat(S)/|V| at that moment
};

struct EvalEpisodeRow {
  Method method;
  double p = 0.0;
  std::uint64_t seed = 0;
  int graph_index = 0;
  int episode = 0;
  double influence_ratio = 0.0;  // at termination (full budget)
  long survival_steps = 0;       // activities survived
  int survived_intervals = 0;
  double objective = 0.0;
  TerminalReason reason = TerminalReason::Running;
  std::vector<CheckpointRow> checkpoints;
  std::vector<std::pair<NodeId, NodeId>> selections;  // (node, out-degree)
};

/// Drives one episode of `method` on the instance; sigma checkpoints use
/// n_sims_metrics simulations.
EvalEpisodeRow run_instrumented_episode(Method method, const TestInstance& instance,
                                        const RandomForest& detector, const HarnessConfig& cfg,
                                        double p, PolicyBundle& acorn, PolicyBundle* agent1_star,
                                        std::uint64_t seed, std::ostream* trace = nullptr);

struct MetricsRow {
  std::string method;
  double p = 0.0;
  double influence_ratio_mean = 0.0;
  double influence_ratio_std = 0.0;
  double survival_mean = 0.0;
  double survival_std = 0.0;
  int episodes = 0;
};

std::vector<MetricsRow> aggregate_metrics(const std::vector<EvalEpisodeRow>& rows);
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
void write_episode_csv(const std::vector<EvalEpisodeRow>& rows, std::ostream& out);
void write_checkpoint_csv(const std::vector<EvalEpisodeRow>& rows, std::ostream& out);

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanStd mean_std(const std::vector<double>& xs);

/// One-sided Mann-Whitney U: p-value for H1 "samples in `a` tend to be
/// larger than samples in `b`" (normal approximation with tie correction).
double mann_whitney_one_sided_p(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace asl::harness
