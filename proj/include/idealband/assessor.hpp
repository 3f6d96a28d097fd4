#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "idealband/model.hpp"
#include "idealband/random_forest.hpp"

namespace idealband {

/// Number of capability-demand dimensions per instance.
inline constexpr std::size_t kNumDemandDims = 18;
/// Number of annotated propensity dimensions per instance, in fixed order:
/// red-vs-blue, risk tolerance, introversion, ultracrepidarianism.
inline constexpr std::size_t kNumPropensityDims = 4;
/// Position of the ultracrepidarianism window in that order.
inline constexpr std::size_t kUltracrepIndex = 3;

/// Which columns the demand-feature assessor sees.
enum class FeatureSet {
  CapsOnly,            // 18 demand scores
  CapsPlusUltracrep,   // + ultracrepidarianism window feature (19)
  CapsPlusAll,         // + all four window features (22)
};

std::string to_string(FeatureSet set);

/// One benchmark instance: demand profile, annotated propensity windows,
/// and a binary outcome label.
struct InstanceFeatures {
  std::string id;
  std::array<double, kNumDemandDims> capability_demands{};  // each in [0, 6]
  std::array<PropensityWindow, kNumPropensityDims> propensity_windows{};
  int label = 0;  // y in {0, 1}
};

/// Scalar summary of a window: the midpoint, or the single finite bound for
/// a one-sided window.  Throws MalformedInstance when no bound is finite.
double window_feature(const PropensityWindow& window);

/// Flattens an instance to the feature vector for one feature set
/// (18, 19, or 22 columns).  Throws MalformedInstance on out-of-range
/// demands, unusable windows, or a non-binary label.
std::vector<double> featurize(const InstanceFeatures& instance, FeatureSet set);

struct AssessorConfig {
  FeatureSet feature_set = FeatureSet::CapsPlusAll;
  std::size_t n_folds = 10;
  ForestConfig forest;  // 100 trees, min_samples_split 50
  std::uint64_t seed = kDefaultSeed;
};

struct CvResult {
  std::vector<double> fold_aurocs;
  double mean_auroc = 0.0;
};

/// Area under the ROC curve via the rank statistic, with average ranks on
/// tied scores.  Throws DegenerateFold unless both classes are present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Stratified fold assignment: shuffles each class, then deals round-robin.
/// Returns fold index per instance.  Throws DegenerateFold when any test
/// fold would miss a class.
std::vector<std::size_t> stratified_folds(const std::vector<int>& labels,
                                          std::size_t n_folds,
                                          std::uint64_t seed);

/// K-fold cross-validated AUROC of a random forest on the configured
/// feature set.
CvResult cross_validated_auroc(const std::vector<InstanceFeatures>& instances,
                               const AssessorConfig& config);

/// Runs the cross-validation once per feature set over identical fold
/// assignments and per-fold forest seeds, so scores differ only in the
/// columns shown to the model.  Results follow the enum order.
std::vector<std::pair<FeatureSet, CvResult>> compare_feature_sets(
    const std::vector<InstanceFeatures>& instances,
    const AssessorConfig& config);

}  // namespace idealband
