#include "idealband/assessor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "idealband/rng.hpp"

namespace idealband {

namespace {

void check_window(const PropensityWindow& w) {
  if (!w.lower_bl && !w.upper_bu) {
    throw MalformedInstance("propensity window has no finite bound");
  }
  if ((w.lower_bl && !std::isfinite(*w.lower_bl)) ||
      (w.upper_bu && !std::isfinite(*w.upper_bu))) {
    throw MalformedInstance("propensity window bound is not finite");
  }
  if (w.lower_bl && w.upper_bu && *w.lower_bl > *w.upper_bu) {
    throw MalformedInstance("propensity window bounds are out of order");
  }
}

/// Shared CV loop: the fold assignment and per-fold forest seeds come from
/// the caller, so different feature sets can be scored on identical splits.
CvResult run_cv(const std::vector<std::vector<double>>& features,
                const std::vector<int>& labels,
                const std::vector<std::size_t>& folds,
                const AssessorConfig& config) {
  CvResult result;
  for (std::size_t f = 0; f < config.n_folds; ++f) {
    std::vector<std::vector<double>> train_x;
    std::vector<int> train_y;
    std::vector<std::vector<double>> test_x;
    std::vector<int> test_y;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (folds[i] == f) {
        test_x.push_back(features[i]);
        test_y.push_back(labels[i]);
      } else {
        train_x.push_back(features[i]);
        train_y.push_back(labels[i]);
      }
    }
    ForestConfig forest_config = config.forest;
    forest_config.seed = splitmix64(config.seed + 31 * (f + 1));
    const RandomForest forest =
        RandomForest::train(train_x, train_y, forest_config);
    std::vector<double> scores;
    scores.reserve(test_x.size());
    for (const auto& x : test_x) scores.push_back(forest.predict_proba(x));
    result.fold_aurocs.push_back(auroc(scores, test_y));
  }
  result.mean_auroc =
      std::accumulate(result.fold_aurocs.begin(), result.fold_aurocs.end(), 0.0) /
      static_cast<double>(result.fold_aurocs.size());
  return result;
}

std::vector<std::vector<double>> featurize_all(
    const std::vector<InstanceFeatures>& instances, FeatureSet set) {
  std::vector<std::vector<double>> features;
  features.reserve(instances.size());
  for (const auto& inst : instances) features.push_back(featurize(inst, set));
  return features;
}

}  // namespace

std::string to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::CapsOnly:
      return "caps_only";
    case FeatureSet::CapsPlusUltracrep:
      return "caps_plus_ultracrep";
    case FeatureSet::CapsPlusAll:
      return "caps_plus_all";
  }
  throw Error("unknown feature set");
}

double window_feature(const PropensityWindow& window) {
  check_window(window);
  if (window.two_sided()) return (*window.lower_bl + *window.upper_bu) / 2.0;
  return window.lower_bl ? *window.lower_bl : *window.upper_bu;
}

std::vector<double> featurize(const InstanceFeatures& instance, FeatureSet set) {
  for (const double d : instance.capability_demands) {
    if (!std::isfinite(d) || d < 0.0 || d > 6.0) {
      throw MalformedInstance("capability demand outside [0, 6]");
    }
  }
  if (instance.label != 0 && instance.label != 1) {
    throw MalformedInstance("label must be 0 or 1");
  }
  for (const auto& w : instance.propensity_windows) check_window(w);

  std::vector<double> x(instance.capability_demands.begin(),
                        instance.capability_demands.end());
  switch (set) {
    case FeatureSet::CapsOnly:
      break;
    case FeatureSet::CapsPlusUltracrep:
      x.push_back(window_feature(instance.propensity_windows[kUltracrepIndex]));
      break;
    case FeatureSet::CapsPlusAll:
      for (const auto& w : instance.propensity_windows) {
        x.push_back(window_feature(w));
      }
      break;
  }
  return x;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw DimensionMismatch("scores and labels must be aligned");
  }
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DegenerateFold("AUROC needs both classes");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Average 1-based ranks across tied scores, then apply the rank statistic.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const auto np = static_cast<double>(n_pos);
  const auto nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<std::size_t> stratified_folds(const std::vector<int>& labels,
                                          std::size_t n_folds,
                                          std::uint64_t seed) {
  if (n_folds < 2) throw Error("n_folds must be at least 2");
  if (labels.size() < n_folds) {
    throw DegenerateFold("fewer instances than folds");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("labels must be 0 or 1");
    (labels[i] == 1 ? pos : neg).push_back(i);
  }
  if (pos.size() < n_folds || neg.size() < n_folds) {
    throw DegenerateFold("each test fold needs both classes");
  }
  Rng rng(splitmix64(seed));
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<std::size_t> fold(labels.size());
  for (std::size_t i = 0; i < pos.size(); ++i) fold[pos[i]] = i % n_folds;
  // Continue the deal so total fold sizes stay balanced.
  for (std::size_t j = 0; j < neg.size(); ++j) {
    fold[neg[j]] = (pos.size() + j) % n_folds;
  }
  return fold;
}

CvResult cross_validated_auroc(const std::vector<InstanceFeatures>& instances,
                               const AssessorConfig& config) {
  const auto features = featurize_all(instances, config.feature_set);
  std::vector<int> labels;
  labels.reserve(instances.size());
  for (const auto& inst : instances) labels.push_back(inst.label);
  const auto folds = stratified_folds(labels, config.n_folds, config.seed);
  return run_cv(features, labels, folds, config);
}

std::vector<std::pair<FeatureSet, CvResult>> compare_feature_sets(
    const std::vector<InstanceFeatures>& instances,
    const AssessorConfig& config) {
  std::vector<int> labels;
  labels.reserve(instances.size());
  for (const auto& inst : instances) labels.push_back(inst.label);
  const auto folds = stratified_folds(labels, config.n_folds, config.seed);
  std::vector<std::pair<FeatureSet, CvResult>> out;
  for (const FeatureSet set : {FeatureSet::CapsOnly,
                               FeatureSet::CapsPlusUltracrep,
                               FeatureSet::CapsPlusAll}) {
    AssessorConfig c = config;
    c.feature_set = set;
    out.emplace_back(set, run_cv(featurize_all(instances, set), labels, folds, c));
  }
  return out;
}

}  // namespace idealband
