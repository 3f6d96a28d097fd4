#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "idealband/estimation.hpp"
#include "idealband/model.hpp"
#include "idealband/rng.hpp"

namespace idealband {

/// Uniform-pair window sampler: both bounds drawn uniformly on the support
/// and sorted.  Draws narrower than kMinRadius are rejected and retried.
struct WindowDistribution {
  double support_min = -5.0;
  double support_max = 5.0;
  double discrimination_a = 1.0;
  std::size_t n_items = 0;
  std::uint64_t seed = kDefaultSeed;
};

/// Throws SamplingExhausted if a draw fails 1000 consecutive rejections,
/// Error on an invalid distribution (empty support, n_items == 0, a <= 0).
std::vector<PropensityWindow> sample_windows(const WindowDistribution& dist);

/// Bernoulli outcomes for one agent against each item; item_id is the
/// zero-based index rendered as a string.
std::vector<OutcomeRecord> simulate_outcomes(
    double true_theta, const std::vector<PropensityWindow>& items,
    std::uint64_t seed);
std::vector<OutcomeRecord> simulate_outcomes(
    double true_theta, const std::vector<CapabilityItem>& items,
    std::uint64_t seed);

/// One synthetic-recovery experiment: sample windows, simulate outcomes at
/// true_theta, estimate theta by maximum likelihood, and also score the
/// pointwise-collapse baseline (argmax over a support grid of the mean
/// outcome among covering windows).
struct RecoveryConfig {
  double true_theta = -1.5;
  WindowDistribution windows;
  std::size_t n_seeds = 20;
  std::uint64_t base_seed = kDefaultSeed;
  FitConfig fit;
};

struct SeedResult {
  std::uint64_t seed_index = 0;
  double theta_mle = 0.0;
  double mle_abs_error = 0.0;
  std::optional<double> collapse_peak;  // nullopt if no grid point is covered
  std::optional<double> collapse_abs_error;
  std::optional<double> std_error;
  bool converged = false;
};

struct RecoverySummary {
  std::vector<SeedResult> per_seed;
  double median_mle_abs_error = 0.0;
  double median_collapse_abs_error = 0.0;
};

RecoverySummary recovery_experiment(const RecoveryConfig& config);

/// One closed-form/property check over the response family.
struct TheoremCheck {
  std::string name;
  bool passed = false;
  double worst_deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct TheoremReport {
  std::vector<TheoremCheck> checks;
  bool all_passed = false;
};

struct ValidationOptions {
  std::size_t draws = 10000;  // randomized-property sample count
  std::uint64_t seed = kDefaultSeed;
  bool inject_fault = false;  // append a deliberately failing check
};

/// Runs the full property suite against the band response family:
/// exact peak normalization, the boundary-response closed form and its
/// calibration (max near half-width 1, value near 0.5657, limits 1/2),
/// both tail expansions, the monotone-model reductions (wide window and
/// exact one-sided), mirror symmetry, and unimodality.
TheoremReport validate_theorems(const ValidationOptions& options = {});

}  // namespace idealband
