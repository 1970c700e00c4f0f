#include "asl/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace asl {

const char* activity_kind_name(ActivityKind k) {
  switch (k) {
    case ActivityKind::Tweet: return "tweet";
    case ActivityKind::Retweet: return "retweet";
    case ActivityKind::Reply: return "reply";
    case ActivityKind::Mention: return "mention";
  }
  return "?";
}

void ActivitySequence::append(const Activity& a) {
  if (a.kind == ActivityKind::Tweet && a.target.has_value())
    throw std::invalid_argument("tweet carries no target");
  if (a.kind != ActivityKind::Tweet && !a.target.has_value())
    throw std::invalid_argument("interactive activity requires a target");
  items_.push_back(a);
  counts_[static_cast<int>(a.kind)]++;
  if (a.kind == ActivityKind::Mention) mention_targets_.insert(*a.target);
}

const std::array<std::string, kNumFeatures> kFeatureNames = {
    "n_tweets",      "n_replies",   "n_retweets",
    "avg_tweets",    "avg_replies", "avg_retweets",
    "retweet_ratio", "replies_ratio", "retweet_replies_ratio", "mentions_ratio"};

FeatureVector extract_features(const ActivitySequence& seq, long elapsed_timesteps) {
  if (elapsed_timesteps < 1) throw std::invalid_argument("elapsed_timesteps must be >= 1");
  const double nt = static_cast<double>(seq.count(ActivityKind::Tweet));
  const double nr = static_cast<double>(seq.count(ActivityKind::Retweet));
  const double np = static_cast<double>(seq.count(ActivityKind::Reply));
  const double el = static_cast<double>(elapsed_timesteps);
  FeatureVector fv;
  fv[0] = nt;
  fv[1] = np;
  fv[2] = nr;
  fv[3] = nt / el;
  fv[4] = np / el;
  fv[5] = nr / el;
  fv[6] = nr / std::max(1.0, nt);
  fv[7] = np / std::max(1.0, nt);
  fv[8] = nr / std::max(1.0, np);
  fv[9] = static_cast<double>(seq.unique_mention_targets()) / std::max(1.0, nt);
  return fv;
}

namespace {

double gini(long n1, long n) {
  if (n == 0) return 0.0;
  double q = static_cast<double>(n1) / n;
  return 2.0 * q * (1.0 - q);
}

struct TreeBuilder {
  const Dataset* data;
  const ForestParams* params;
  std::mt19937_64* rng;
  RandomForest::Tree tree;

  int build(std::vector<int>& idx, int depth) {
    long n = static_cast<long>(idx.size());
    long n1 = 0;
    for (int i : idx) n1 += (*data)[i].label;

    RandomForest::Node node;
    node.p1 = n > 0 ? static_cast<double>(n1) / n : 0.5;
    int node_id = static_cast<int>(tree.size());
    tree.push_back(node);

    if (depth >= params->max_depth || n < 2 * params->min_leaf || n1 == 0 || n1 == n)
      return node_id;

    // random feature subset, then best Gini split over midpoints
    std::array<int, kNumFeatures> feats;
    std::iota(feats.begin(), feats.end(), 0);
    std::shuffle(feats.begin(), feats.end(), *rng);
    int n_feats = std::min(params->features_per_split, kNumFeatures);

    double best_impurity = gini(n1, n);
    int best_feat = -1;
    double best_thr = 0.0;
    std::vector<std::pair<double, int>> vals(idx.size());
    for (int fi = 0; fi < n_feats; ++fi) {
      int f = feats[fi];
      for (std::size_t i = 0; i < idx.size(); ++i)
        vals[i] = {(*data)[idx[i]].features[f], (*data)[idx[i]].label};
      std::sort(vals.begin(), vals.end());
      long left_n = 0, left_n1 = 0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left_n++;
        left_n1 += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        long right_n = n - left_n, right_n1 = n1 - left_n1;
        if (left_n < params->min_leaf || right_n < params->min_leaf) continue;
        double imp = (left_n * gini(left_n1, left_n) + right_n * gini(right_n1, right_n)) / n;
        if (imp + 1e-12 < best_impurity) {
          best_impurity = imp;
          best_feat = f;
          best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_feat < 0) return node_id;

    std::vector<int> left_idx, right_idx;
    for (int i : idx)
      ((*data)[i].features[best_feat] <= best_thr ? left_idx : right_idx).push_back(i);

    tree[node_id].feature = best_feat;
    tree[node_id].threshold = best_thr;
    tree[node_id].left = build(left_idx, depth + 1);
    tree[node_id].right = build(right_idx, depth + 1);
    return node_id;
  }
};

double tree_p1(const RandomForest::Tree& tree, const FeatureVector& fv) {
  int cur = 0;
  while (tree[cur].feature >= 0)
    cur = fv[tree[cur].feature] <= tree[cur].threshold ? tree[cur].left : tree[cur].right;
  return tree[cur].p1;
}

}  // namespace

RandomForest RandomForest::train(const Dataset& data, const ForestParams& params) {
  if (data.size() < 2) throw std::invalid_argument("train_forest: need >= 2 examples");
  bool has0 = false, has1 = false;
  for (const auto& ex : data) (ex.label ? has1 : has0) = true;
  if (!has0 || !has1) throw std::invalid_argument("train_forest: both classes must be present");

  RandomForest forest;
  forest.params_ = params;
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(data.size()) - 1);
  for (int t = 0; t < params.n_trees; ++t) {
    std::vector<int> boot(data.size());
    for (auto& i : boot) i = pick(rng);
    TreeBuilder builder{&data, &params, &rng, {}};
    builder.build(boot, 0);
    forest.trees_.push_back(std::move(builder.tree));
  }
  return forest;
}

Prediction RandomForest::predict(const FeatureVector& fv) const {
  if (trees_.empty()) throw std::logic_error("predict on untrained forest");
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree_p1(tree, fv);
  Prediction pred;
  pred.probability = sum / static_cast<double>(trees_.size());
  pred.label = pred.probability >= 0.5 ? 1 : 0;  // tie classifies as bot
  return pred;
}

RandomForest RandomForest::from_trees(std::vector<Tree> trees) {
  RandomForest f;
  f.trees_ = std::move(trees);
  return f;
}

std::string RandomForest::to_json() const {
  nlohmann::json doc;
  doc["format"] = "asl-forest";
  doc["version"] = 1;
  doc["n_trees"] = trees_.size();
  auto& jt = doc["trees"] = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree)
      nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left},
                       {"r", n.right}, {"p1", n.p1}});
    jt.push_back(std::move(nodes));
  }
  return doc.dump();
}

RandomForest RandomForest::from_json(const std::string& text) {
  auto doc = nlohmann::json::parse(text);
  if (doc.value("format", "") != "asl-forest" || doc.value("version", 0) != 1)
    throw std::runtime_error("unrecognized forest document");
  std::vector<Tree> trees;
  for (const auto& jt : doc.at("trees")) {
    Tree tree;
    for (const auto& jn : jt) {
      Node n;
      n.feature = jn.at("f").get<int>();
      n.threshold = jn.at("t").get<double>();
      n.left = jn.at("l").get<int>();
      n.right = jn.at("r").get<int>();
      n.p1 = jn.at("p1").get<double>();
      tree.push_back(n);
    }
    trees.push_back(std::move(tree));
  }
  return from_trees(std::move(trees));
}

Dataset generate_labeled_corpus(const ActivityProfile& human, const ActivityProfile& bot,
                                int n_per_class, int episode_length, std::uint64_t rng_seed) {
  if (n_per_class <= 0) throw std::invalid_argument("n_per_class must be > 0");
  if (episode_length <= 0) throw std::invalid_argument("episode_length must be > 0");
  for (const auto* prof : {&human, &bot}) {
    double total = std::accumulate(prof->rates.begin(), prof->rates.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("profile has zero activity rate");
    if (prof->mention_target_pool < 1) throw std::invalid_argument("mention_target_pool must be >= 1");
  }

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Dataset data;
  data.reserve(2 * static_cast<std::size_t>(n_per_class));
  for (int label = 0; label <= 1; ++label) {
    const ActivityProfile& prof = label ? bot : human;
    for (int acc = 0; acc < n_per_class; ++acc) {
      double jitter = 1.0 + prof.rate_jitter * (2.0 * u01(rng) - 1.0);
      ActivitySequence seq;
      std::uniform_int_distribution<NodeId> target(0, prof.mention_target_pool - 1);
      for (int t = 0; t < episode_length; ++t) {
        for (int k = 0; k < kNumActivityKinds; ++k) {
          std::poisson_distribution<int> n_acts(std::max(0.0, prof.rates[k] * jitter));
          int m = n_acts(rng);
          for (int i = 0; i < m; ++i) {
            Activity a;
            a.kind = static_cast<ActivityKind>(k);
            a.timestep = t;
            if (a.kind != ActivityKind::Tweet) a.target = target(rng);
            seq.append(a);
          }
        }
      }
      data.push_back({extract_features(seq, episode_length), label});
    }
  }
  return data;
}

Dataset load_labeled_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("labeled csv: empty stream");
  std::vector<std::string> header;
  {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) header.push_back(cell);
  }
  std::array<int, kNumFeatures> col{};
  col.fill(-1);
  int label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") label_col = static_cast<int>(c);
    for (int f = 0; f < kNumFeatures; ++f)
      if (header[c] == kFeatureNames[f]) col[f] = static_cast<int>(c);
  }
  if (label_col < 0) throw std::runtime_error("labeled csv: missing 'label' column");
  for (int f = 0; f < kNumFeatures; ++f)
    if (col[f] < 0) throw std::runtime_error("labeled csv: missing column '" + kFeatureNames[f] + "'");

  Dataset data;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    auto parse = [&](int c) {
      if (c >= static_cast<int>(cells.size()))
        throw std::runtime_error("labeled csv: row " + std::to_string(row) + " too short");
      try {
        std::size_t used = 0;
        double v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error("labeled csv: non-numeric cell at row " + std::to_string(row) +
                                 ", column " + std::to_string(c + 1));
      }
    };
    LabeledExample ex;
    for (int f = 0; f < kNumFeatures; ++f) {
      ex.features[f] = parse(col[f]);
      if (!(ex.features[f] >= 0.0) || !std::isfinite(ex.features[f]))
        throw std::runtime_error("labeled csv: feature '" + kFeatureNames[f] +
                                 "' must be finite and >= 0 (row " + std::to_string(row) + ")");
    }
    double lv = parse(label_col);
    if (lv != 0.0 && lv != 1.0)
      throw std::runtime_error("labeled csv: label must be 0 or 1 (row " + std::to_string(row) + ")");
    ex.label = static_cast<int>(lv);
    data.push_back(ex);
  }
  return data;
}

void save_labeled_csv(const Dataset& data, std::ostream& out) {
  out.precision(17);
  for (int f = 0; f < kNumFeatures; ++f) out << kFeatureNames[f] << ",";
  out << "label\n";
  for (const auto& ex : data) {
    for (int f = 0; f < kNumFeatures; ++f) out << ex.features[f] << ",";
    out << ex.label << "\n";
  }
}

ClassifierScores evaluate_classifier(const RandomForest& model, const Dataset& test) {
  long tp = 0, fp = 0, fn = 0, correct = 0;
  for (const auto& ex : test) {
    int pred = model.predict(ex.features).label;
    if (pred == ex.label) ++correct;
    if (pred == 1 && ex.label == 1) ++tp;
    if (pred == 1 && ex.label == 0) ++fp;
    if (pred == 0 && ex.label == 1) ++fn;
  }
  ClassifierScores s;
  if (!test.empty()) s.accuracy = static_cast<double>(correct) / test.size();
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace asl
