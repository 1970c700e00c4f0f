#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "asl/graph.hpp"

namespace asl {

enum class ActivityKind : int { Tweet = 0, Retweet = 1, Reply = 2, Mention = 3 };
constexpr int kNumActivityKinds = 4;
const char* activity_kind_name(ActivityKind k);

struct Activity {
  ActivityKind kind;
  std::optional<NodeId> target;  // absent for Tweet
  int timestep = 0;
};

/// The bot's ordered activity DNA with incrementally maintained counts.
class ActivitySequence {
public:
  void append(const Activity& a);
  const std::vector<Activity>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  long count(ActivityKind k) const { return counts_[static_cast<int>(k)]; }
  long unique_mention_targets() const { return static_cast<long>(mention_targets_.size()); }

private:
  std::vector<Activity> items_;
  std::array<long, kNumActivityKinds> counts_{};
  std::unordered_set<NodeId> mention_targets_;
};

constexpr int kNumFeatures = 10;
using FeatureVector = std::array<double, kNumFeatures>;
extern const std::array<std::string, kNumFeatures> kFeatureNames;

/// Table-of-features extraction; ratios use a max(1, denominator) guard and
/// averages divide by the elapsed environment clock.
FeatureVector extract_features(const ActivitySequence& seq, long elapsed_timesteps);

struct LabeledExample {
  FeatureVector features;
  int label = 0;  // 1 = bot
};
using Dataset = std::vector<LabeledExample>;

struct ForestParams {
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 2;
  int features_per_split = 4;
  std::uint64_t rng_seed = 0;
};

struct Prediction {
  int label = 0;
  double probability = 0.0;  // mean leaf probability of class 1
};

class RandomForest {
public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double p1 = 0.0;
  };
  using Tree = std::vector<Node>;

  static RandomForest train(const Dataset& data, const ForestParams& params);

  Prediction predict(const FeatureVector& fv) const;
  bool trained() const { return !trees_.empty(); }
  std::size_t n_trees() const { return trees_.size(); }

  std::string to_json() const;
  static RandomForest from_json(const std::string& text);

  // test-only visibility into structure (unit tests build stumps directly)
  static RandomForest from_trees(std::vector<Tree> trees);

private:
  std::vector<Tree> trees_;
  ForestParams params_;
};

struct ActivityProfile {
  std::array<double, kNumActivityKinds> rates{};  // expected activities per timestep
  int mention_target_pool = 10;                   // distinct ids mentions draw from
  double rate_jitter = 0.5;                       // per-account multiplicative spread
};

/// Synthetic labeled corpus: 2*n_per_class accounts whose activity scripts
/// follow the class profile; features extracted on the shared episode clock.
Dataset generate_labeled_corpus(const ActivityProfile& human, const ActivityProfile& bot,
                                int n_per_class, int episode_length, std::uint64_t rng_seed);

/// CSV with a header naming the 10 features plus "label".
Dataset load_labeled_csv(std::istream& in);
void save_labeled_csv(const Dataset& data, std::ostream& out);

struct ClassifierScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
ClassifierScores evaluate_classifier(const RandomForest& model, const Dataset& test);

}  // namespace asl
