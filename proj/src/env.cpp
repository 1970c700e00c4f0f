#include "asl/env.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace asl {

void EnvConfig::validate() const {
  if (K < 1 || Q < 1 || T < 1) throw std::invalid_argument("env config: K, Q, T must be >= 1");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("env config: p must lie in [0,1]");
  if (n_sims_reward < 1) throw std::invalid_argument("env config: n_sims_reward must be >= 1");
}

const char* terminal_reason_name(TerminalReason r) {
  switch (r) {
    case TerminalReason::Running: return "RUNNING";
    case TerminalReason::Detected: return "DETECTED";
    case TerminalReason::Horizon: return "HORIZON";
    case TerminalReason::AllAcquired: return "ALL_ACQUIRED";
  }
  return "?";
}

Env::Env(const SocialGraph& g, const RandomForest& detector, const EmbeddingMatrix& embeddings,
         EnvConfig cfg)
    : g_(&g), detector_(&detector), emb_(&embeddings), cfg_(cfg) {
  cfg_.validate();
  if (embeddings.n_nodes != g.n_nodes())
    throw std::invalid_argument("env: embedding row count does not match graph");
  reset();
}

void Env::reset() { reset(cfg_.rng_seed); }

void Env::reset(std::uint64_t rng_seed) {
  cfg_.rng_seed = rng_seed;
  rng_.seed(rng_seed);
  seq_ = {};
  in_s_.assign(g_->n_nodes(), 0);
  followers_sorted_.clear();
  t_ = 0;
  pending_kind_.reset();
  reason_ = TerminalReason::Running;
  survived_intervals_ = 0;
  final_sigma_ = 0.0;
  sum_step_rewards_ = 0.0;
  spread_seed_counter_ = 0;
  trace_.clear();
}

ActivityKind Env::pending_kind() const {
  if (!pending_kind_) throw std::logic_error("no follower phase pending");
  return *pending_kind_;
}

double Env::estimate_spread(std::span<const NodeId> seeds) {
  std::uint64_t seed = cfg_.rng_seed * 0x9e3779b97f4a7c15ULL + (++spread_seed_counter_);
  return spread(*g_, seeds, cfg_.p, cfg_.n_sims_reward, seed).mean;
}

void Env::finish_episode(TerminalReason reason, StepOutcome& out) {
  reason_ = reason;
  pending_kind_.reset();
  final_sigma_ = estimate_spread(followers_sorted_);
  out.reward += final_sigma_;  // delayed reward
  out.terminated = true;
  out.reason = reason;
}

void Env::append_and_check(const Activity& a, StepOutcome& out) {
  seq_.append(a);
  ++t_;
  ++out.info.activities_appended;
  if (seq_.size() % static_cast<std::size_t>(cfg_.K) == 0) {
    FeatureVector fv = extract_features(seq_, std::max(1, t_));
    if (detector_->predict(fv).label == 1) {
      out.info.detector_fired = true;
      finish_episode(TerminalReason::Detected, out);
    } else {
      ++survived_intervals_;
    }
  }
}

StepOutcome Env::step_activity(ActivityKind kind) {
  if (terminated()) throw std::logic_error("step_activity on terminated episode");
  if (pending_kind_) throw std::logic_error("step_activity while follower phase pending");

  StepOutcome out;
  if (kind == ActivityKind::Tweet) {
    append_and_check({ActivityKind::Tweet, std::nullopt, t_}, out);
    if (!out.terminated && t_ >= cfg_.T) finish_episode(TerminalReason::Horizon, out);
  } else {
    pending_kind_ = kind;
    out.follower_phase_requested = true;
  }
  trace_.push_back({t_, 'I', activity_kind_name(kind), 0, out.reward,
                    out.info.detector_fired, followers_sorted_.size(), -1, -1});
  return out;
}

int Env::acquisition_cost(NodeId u) {
  if (u < 0 || u >= g_->n_nodes()) throw std::out_of_range("acquisition_cost: node out of range");
  if (in_s_[u]) throw std::invalid_argument("acquisition_cost: node already a follower");
  double theta = 1.0 - (1.0 + static_cast<double>(followers_sorted_.size())) /
                           (1.0 + static_cast<double>(g_->out_degree(u)));
  theta = std::clamp(theta, 0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int f = u01(rng_) < theta ? 1 : 0;
  return std::max(1, cfg_.Q * f);
}

StepOutcome Env::step_follower(NodeId u) {
  if (terminated()) throw std::logic_error("step_follower on terminated episode");
  if (!pending_kind_) throw std::logic_error("step_follower without a pending follower phase");
  if (u < 0 || u >= g_->n_nodes() || in_s_[u])
    throw std::invalid_argument("step_follower: node is masked (already acquired or invalid)");

  const ActivityKind kind = *pending_kind_;
  StepOutcome out;
  const int g = acquisition_cost(u);
  out.info.g_drawn = g;

  for (int i = 0; i < g && !out.terminated; ++i)
    append_and_check({kind, u, t_}, out);

  if (!out.terminated) {
    in_s_[u] = 1;
    followers_sorted_.insert(
        std::lower_bound(followers_sorted_.begin(), followers_sorted_.end(), u), u);
    out.info.acquired = u;
    const NodeId single[1] = {u};
    double r_step = estimate_spread(single);
    out.reward += r_step;
    sum_step_rewards_ += r_step;
    pending_kind_.reset();
    if (followers_sorted_.size() == static_cast<std::size_t>(g_->n_nodes()))
      finish_episode(TerminalReason::AllAcquired, out);
    else if (t_ >= cfg_.T)
      finish_episode(TerminalReason::Horizon, out);
  }
  out.reason = reason_;
  trace_.push_back({t_, 'F', activity_kind_name(kind), g, out.reward,
                    out.info.detector_fired, followers_sorted_.size(), u, g_->out_degree(u)});
  return out;
}

ObservationI Env::observe_i() const {
  ObservationI obs;
  const double denom = std::max(1, t_);
  for (int k = 0; k < kNumActivityKinds; ++k)
    obs.v[k] = static_cast<double>(seq_.count(static_cast<ActivityKind>(k))) / denom;
  obs.v[4] = static_cast<double>(followers_sorted_.size());
  return obs;
}

std::vector<double> Env::encode_membership() const {
  std::vector<double> m(g_->n_nodes());
  const double s = static_cast<double>(followers_sorted_.size());
  for (NodeId u = 0; u < g_->n_nodes(); ++u)
    m[u] = in_s_[u] ? 0.0 : (1.0 + s) / (1.0 + static_cast<double>(g_->out_degree(u)));
  return m;
}

ObservationII Env::observe_ii() const {
  ObservationII obs;
  obs.embeddings = emb_;
  const double denom = std::max(1, t_);
  for (int k = 0; k < kNumActivityKinds; ++k)
    obs.activity[k] = static_cast<double>(seq_.count(static_cast<ActivityKind>(k))) / denom;
  obs.membership = encode_membership();
  obs.mask.resize(g_->n_nodes());
  for (NodeId u = 0; u < g_->n_nodes(); ++u) obs.mask[u] = in_s_[u] ? 0 : 1;
  return obs;
}

double Env::final_spread_estimate() const {
  if (!terminated()) throw std::logic_error("final_spread_estimate on running episode");
  return final_sigma_;
}

double Env::episode_objective() const {
  if (!terminated()) throw std::logic_error("episode_objective on running episode");
  return final_sigma_ * (1.0 + static_cast<double>(survived_intervals_));
}

EpisodeRecord make_episode_record(const Env& env) {
  EpisodeRecord rec;
  rec.objective = env.episode_objective();
  rec.survived_intervals = env.survived_intervals();
  rec.sigma_final = env.final_spread_estimate();
  rec.influence_ratio = env.graph().n_nodes() > 0
                            ? rec.sigma_final / static_cast<double>(env.graph().n_nodes())
                            : 0.0;
  rec.seq_length = env.sequence().size();
  rec.clock = env.clock();
  rec.reason = env.terminal_reason();
  for (const auto& step : env.trace())
    if (step.phase == 'F' && !step.detector_fired && step.node >= 0)
      rec.selections.emplace_back(step.node, step.node_out_degree);
  return rec;
}

void write_trace_jsonl(const Env& env, std::ostream& out) {
  for (const auto& s : env.trace()) {
    nlohmann::json j{{"t", s.t},
                     {"phase", std::string(1, s.phase)},
                     {"action", s.action},
                     {"g", s.g},
                     {"reward", s.reward},
                     {"detector_fired", s.detector_fired},
                     {"followers", s.followers}};
    if (s.node >= 0) {
      j["node"] = s.node;
      j["node_out_degree"] = s.node_out_degree;
    }
    out << j.dump() << "\n";
  }
}

}  // namespace asl
