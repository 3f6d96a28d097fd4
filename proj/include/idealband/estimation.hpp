#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idealband/model.hpp"

namespace idealband {

/// One scored response.  `item_id` ties the outcome back to a bank record;
/// APIs that take aligned item/outcome vectors only use `success`.
struct OutcomeRecord {
  std::string item_id;
  int success = 0;  // 0 or 1
};

/// Controls for the one-dimensional trait fit.
struct FitConfig {
  double theta_min = -10.0;
  double theta_max = 10.0;
  double grid_step = 0.05;
  double tolerance = 1e-8;
  int max_iterations = 200;
  double clamp_eps = 1e-12;  // probability clamp inside the likelihood only
};

/// Result of a maximum-likelihood trait fit.
struct FitResult {
  double theta_hat = 0.0;
  std::optional<double> std_error;  // nullopt when curvature is not positive
  double log_likelihood = 0.0;
  std::size_t n_items = 0;
  bool converged = false;
  bool at_bound = false;  // theta_hat pinned at theta_min / theta_max
  double init_theta = 0.0;
};

/// Bernoulli log-likelihood of theta under the band model.  Probabilities are
/// clamped to [clamp_eps, 1 - clamp_eps] here and nowhere else.
/// Throws EmptyData on no items; Error on length mismatch.
double log_likelihood(double theta, const std::vector<PropensityWindow>& items,
                      const std::vector<OutcomeRecord>& outcomes,
                      const FitConfig& config = {});

/// Same likelihood under the monotone model.
double log_likelihood(double theta, const std::vector<CapabilityItem>& items,
                      const std::vector<OutcomeRecord>& outcomes,
                      const FitConfig& config = {});

/// Deterministic coarse-grid argmax used to initialize the trait fit.  The
/// grid spans [min finite bound - 2, max finite bound + 2] clipped to the
/// theta bounds, in steps of grid_step, joined by every item's finite bounds
/// and midpoints so a band narrower than the step still seeds its own
/// likelihood basin; ties resolve to the smallest theta.
double initialize_theta(const std::vector<PropensityWindow>& items,
                        const std::vector<OutcomeRecord>& outcomes,
                        const FitConfig& config = {});
double initialize_theta(const std::vector<CapabilityItem>& items,
                        const std::vector<OutcomeRecord>& outcomes,
                        const FitConfig& config = {});

/// Maximum-likelihood trait estimate: grid initialization, then safeguarded
/// Newton refinement (bisection fallback) inside the bracketing grid cell.
/// All-success / all-failure data are legal and drive the estimate to a theta
/// bound, reported via at_bound rather than an error.
FitResult fit_propensity(const std::vector<PropensityWindow>& items,
                         const std::vector<OutcomeRecord>& outcomes,
                         const FitConfig& config = {});
FitResult fit_capability(const std::vector<CapabilityItem>& items,
                         const std::vector<OutcomeRecord>& outcomes,
                         const FitConfig& config = {});

/// Mean outcome over the windows whose band contains x; nullopt when no
/// window covers x.
std::optional<double> empirical_point_collapse(
    const std::vector<PropensityWindow>& items,
    const std::vector<OutcomeRecord>& outcomes, double x);

/// Success fraction per distinct window, keyed by the exact bound pair with
/// +-inf standing in for a missing side.
std::map<std::pair<double, double>, double> empirical_surface(
    const std::vector<PropensityWindow>& items,
    const std::vector<OutcomeRecord>& outcomes);

/// Success fraction per distinct difficulty.
std::map<double, double> empirical_icc(
    const std::vector<CapabilityItem>& items,
    const std::vector<OutcomeRecord>& outcomes);

}  // namespace idealband
