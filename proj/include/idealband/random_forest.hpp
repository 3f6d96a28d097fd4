#pragma once

#include <cstdint>
#include <vector>

#include "idealband/errors.hpp"
#include "idealband/rng.hpp"

namespace idealband {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t min_samples_split = 50;  // nodes below this size become leaves
  std::uint64_t seed = kDefaultSeed;
};

/// One CART classification tree grown on Gini impurity.  Splits consider a
/// random sqrt(d)-subset of features per node; leaves store the class-1
/// fraction of their training rows.
class DecisionTree {
 public:
  /// Pre: x has the dimensionality the tree was grown with.
  double predict(const std::vector<double>& x) const;

  static DecisionTree grow(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels,
                           const std::vector<std::size_t>& rows,
                           std::size_t mtry, std::size_t min_samples_split,
                           Rng& rng);

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double leaf = 0.0;
  };

  std::int32_t build(const std::vector<std::vector<double>>& features,
                     const std::vector<int>& labels,
                     std::vector<std::size_t>& rows, std::size_t mtry,
                     std::size_t min_samples_split, Rng& rng);

  std::vector<Node> nodes_;
};

/// Bagged ensemble of CART trees with per-tree bootstrap resampling.  Tree
/// seeds derive from the config seed, so training is fully deterministic.
class RandomForest {
 public:
  /// Throws EmptyData on no rows, DimensionMismatch on ragged rows or a
  /// labels/features length mismatch, SingleClass if labels are constant.
  static RandomForest train(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels,
                            const ForestConfig& config = {});

  /// Mean leaf value over the ensemble.  Throws EmptyData on an untrained
  /// forest, DimensionMismatch on a wrong-sized input.
  double predict_proba(const std::vector<double>& x) const;

  std::size_t n_features() const { return n_features_; }

 private:
  std::vector<DecisionTree> trees_;
  std::size_t n_features_ = 0;
};

}  // namespace idealband
