#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "asl/detector.hpp"
#include "asl/diffusion.hpp"
#include "asl/graph.hpp"
#include "asl/node2vec.hpp"

namespace asl {

struct EnvConfig {
  int K = 20;               // detection interval, in appended activities
  int Q = 3;                // acquisition-cost multiplier
  int T = 60;               // horizon, in timesteps (one timestep per activity)
  double p = 0.8;           // activation probability
  int n_sims_reward = 200;  // MC sims behind step/delayed reward estimates
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class TerminalReason { Running, Detected, Horizon, AllAcquired };
const char* terminal_reason_name(TerminalReason r);

struct ObservationI {
  std::array<double, 5> v{};  // 4 activity-kind frequencies, then |S_t|
};

struct ObservationII {
  const EmbeddingMatrix* embeddings = nullptr;
  std::array<double, 4> activity{};      // kind frequencies up to t
  std::vector<double> membership;        // Eq-style encoding, 0 for members of S
  std::vector<std::uint8_t> mask;        // valid iff u not in S_t
};

struct StepInfo {
  std::optional<NodeId> acquired;
  int g_drawn = 0;
  bool detector_fired = false;
  int activities_appended = 0;
};

struct StepOutcome {
  double reward = 0.0;
  bool terminated = false;
  bool follower_phase_requested = false;
  TerminalReason reason = TerminalReason::Running;
  StepInfo info;
};

struct TraceStep {
  int t = 0;
  char phase = 'I';  // 'I' activity decision, 'F' follower decision
  std::string action;
  int g = 0;
  double reward = 0.0;
  bool detector_fired = false;
  std::size_t followers = 0;
  NodeId node = -1;
  NodeId node_out_degree = -1;
};

/// The adversarial-socialbot MDP. One instance is a sequential state machine;
/// graph, embeddings and detector are shared immutable inputs.
class Env {
public:
  Env(const SocialGraph& g, const RandomForest& detector, const EmbeddingMatrix& embeddings,
      EnvConfig cfg);

  void reset();
  void reset(std::uint64_t rng_seed);

  /// Tweet appends directly; interactive kinds open the follower phase and
  /// hand control to the second-level agent.
  StepOutcome step_activity(ActivityKind kind);
  StepOutcome step_follower(NodeId u);

  bool follower_phase_pending() const { return pending_kind_.has_value(); }
  ActivityKind pending_kind() const;

  ObservationI observe_i() const;
  ObservationII observe_ii() const;
  std::vector<double> encode_membership() const;

  // theta = clamp(1 - (1+|S|)/(1+outdeg(u)), 0, 1); g = max(1, Q * Bernoulli(theta))
  int acquisition_cost(NodeId u);

  bool terminated() const { return reason_ != TerminalReason::Running; }
  TerminalReason terminal_reason() const { return reason_; }
  int clock() const { return t_; }
  const ActivitySequence& sequence() const { return seq_; }
  const std::vector<NodeId>& followers() const { return followers_sorted_; }
  bool is_follower(NodeId u) const { return in_s_[u]; }
  int survived_intervals() const { return survived_intervals_; }
  double final_spread_estimate() const;  // sigma_hat(S_{T*}) at termination

  /// R* = sigma_hat(S_{T*}, G) * (1 + T*); only valid once terminated.
  double episode_objective() const;

  double sum_step_rewards() const { return sum_step_rewards_; }
  const SocialGraph& graph() const { return *g_; }
  const EnvConfig& config() const { return cfg_; }
  const std::vector<TraceStep>& trace() const { return trace_; }

private:
  void append_and_check(const Activity& a, StepOutcome& out);
  void finish_episode(TerminalReason reason, StepOutcome& out);
  double estimate_spread(std::span<const NodeId> seeds);

  const SocialGraph* g_;
  const RandomForest* detector_;
  const EmbeddingMatrix* emb_;
  EnvConfig cfg_;
  std::mt19937_64 rng_;

  ActivitySequence seq_;
  std::vector<char> in_s_;
  std::vector<NodeId> followers_sorted_;
  int t_ = 0;
  std::optional<ActivityKind> pending_kind_;
  TerminalReason reason_ = TerminalReason::Running;
  int survived_intervals_ = 0;
  double final_sigma_ = 0.0;
  double sum_step_rewards_ = 0.0;
  std::uint64_t spread_seed_counter_ = 0;
  std::vector<TraceStep> trace_;
};

struct EpisodeRecord {
  double objective = 0.0;        // R*
  int survived_intervals = 0;    // T*
  double sigma_final = 0.0;
  double influence_ratio = 0.0;  // sigma_final / |V|
  std::size_t seq_length = 0;
  int clock = 0;
  TerminalReason reason = TerminalReason::Running;
  std::vector<std::pair<NodeId, NodeId>> selections;  // (node, out-degree) in order
};

EpisodeRecord make_episode_record(const Env& env);
void write_trace_jsonl(const Env& env, std::ostream& out);

}  // namespace asl
