#include "idealband/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace idealband {

namespace {

/// Split quality, higher is better: sum over sides of (pos^2 + neg^2) / n.
/// Maximizing this is equivalent to minimizing the weighted Gini impurity.
double side_purity(double pos, double n) {
  const double neg = n - pos;
  return (pos * pos + neg * neg) / n;
}

}  // namespace

std::int32_t DecisionTree::build(const std::vector<std::vector<double>>& features,
                                 const std::vector<int>& labels,
                                 std::vector<std::size_t>& rows,
                                 std::size_t mtry,
                                 std::size_t min_samples_split, Rng& rng) {
  const std::size_t n = rows.size();
  std::size_t pos = 0;
  for (const std::size_t r : rows) pos += static_cast<std::size_t>(labels[r]);

  const auto idx = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{});
  if (n < min_samples_split || pos == 0 || pos == n) {
    nodes_[idx].leaf = static_cast<double>(pos) / static_cast<double>(n);
    return idx;
  }

  // Candidate features: partial Fisher-Yates prefix of size mtry.
  const std::size_t d = features[rows[0]].size();
  std::vector<std::size_t> feats(d);
  std::iota(feats.begin(), feats.end(), 0);
  const std::size_t k = std::min(mtry, d);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(feats[i], feats[i + rng.index(d - i)]);
  }

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_purity = side_purity(static_cast<double>(pos),
                                   static_cast<double>(n));  // no-split baseline
  std::vector<std::pair<double, int>> vals(n);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t f = feats[c];
    for (std::size_t i = 0; i < n; ++i) {
      vals[i] = {features[rows[i]][f], labels[rows[i]]};
    }
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left_pos = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      left_pos += vals[i - 1].second;
      if (!(vals[i].first > vals[i - 1].first)) continue;
      const auto nl = static_cast<double>(i);
      const auto nr = static_cast<double>(n - i);
      const double purity = side_purity(left_pos, nl) +
                            side_purity(static_cast<double>(pos) - left_pos, nr);
      if (purity > best_purity) {  // strict: first improvement wins ties
        best_purity = purity;
        best_feature = static_cast<int>(f);
        best_threshold = 0.5 * (vals[i - 1].first + vals[i].first);
      }
    }
  }

  if (best_feature < 0) {
    nodes_[idx].leaf = static_cast<double>(pos) / static_cast<double>(n);
    return idx;
  }

  std::vector<std::size_t> left_rows, right_rows;
  left_rows.reserve(n);
  right_rows.reserve(n);
  for (const std::size_t r : rows) {
    const auto f = static_cast<std::size_t>(best_feature);
    (features[r][f] <= best_threshold ? left_rows : right_rows).push_back(r);
  }
  const std::int32_t left =
      build(features, labels, left_rows, mtry, min_samples_split, rng);
  const std::int32_t right =
      build(features, labels, right_rows, mtry, min_samples_split, rng);
  nodes_[idx].feature = best_feature;
  nodes_[idx].threshold = best_threshold;
  nodes_[idx].left = left;
  nodes_[idx].right = right;
  return idx;
}

DecisionTree DecisionTree::grow(const std::vector<std::vector<double>>& features,
                                const std::vector<int>& labels,
                                const std::vector<std::size_t>& rows,
                                std::size_t mtry,
                                std::size_t min_samples_split, Rng& rng) {
  DecisionTree tree;
  std::vector<std::size_t> mutable_rows = rows;
  tree.build(features, labels, mutable_rows, mtry, min_samples_split, rng);
  return tree;
}

double DecisionTree::predict(const std::vector<double>& x) const {
  std::int32_t at = 0;
  while (nodes_[at].feature >= 0) {
    const auto& node = nodes_[at];
    at = x[static_cast<std::size_t>(node.feature)] <= node.threshold
             ? node.left
             : node.right;
  }
  return nodes_[at].leaf;
}

RandomForest RandomForest::train(const std::vector<std::vector<double>>& features,
                                 const std::vector<int>& labels,
                                 const ForestConfig& config) {
  if (features.empty()) throw EmptyData("no training rows");
  if (features.size() != labels.size()) {
    throw DimensionMismatch("features and labels must be aligned");
  }
  if (config.n_trees == 0) throw Error("n_trees must be positive");
  if (config.min_samples_split < 2) throw Error("min_samples_split must be >= 2");
  const std::size_t d = features[0].size();
  if (d == 0) throw DimensionMismatch("feature rows must be nonempty");
  for (const auto& row : features) {
    if (row.size() != d) throw DimensionMismatch("ragged feature matrix");
  }
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) {
    throw SingleClass("training labels contain a single class");
  }

  RandomForest forest;
  forest.n_features_ = d;
  const std::size_t n = features.size();
  const auto mtry = static_cast<std::size_t>(
      std::max(1.0, std::floor(std::sqrt(static_cast<double>(d)))));
  forest.trees_.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng(splitmix64(config.seed + t));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.index(n);  // bootstrap resample
    forest.trees_.push_back(DecisionTree::grow(features, labels, rows, mtry,
                                               config.min_samples_split, rng));
  }
  return forest;
}

double RandomForest::predict_proba(const std::vector<double>& x) const {
  if (trees_.empty()) throw EmptyData("forest has no trees");
  if (x.size() != n_features_) {
    throw DimensionMismatch("input dimensionality does not match training data");
  }
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

}  // namespace idealband
