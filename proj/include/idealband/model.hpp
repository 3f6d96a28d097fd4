#pragma once

#include <optional>

#include "idealband/errors.hpp"

namespace idealband {

/// Windows narrower than this radius are rejected as degenerate.
inline constexpr double kMinRadius = 1e-6;

/// Cap applied to the adjusted slope so downstream products stay finite.
inline constexpr double kMaxSlope = 1e8;

/// One test item in the capability (monotone) family.
struct CapabilityItem {
  double difficulty_b = 0.0;
  double discrimination_a = 1.0;  // must be > 0
};

/// One test item in the propensity (band) family.  A missing bound means the
/// band extends to infinity on that side.
struct PropensityWindow {
  std::optional<double> lower_bl;      // nullopt == -inf
  std::optional<double> upper_bu;      // nullopt == +inf
  double base_discrimination_a = 1.0;  // must be > 0

  bool two_sided() const { return lower_bl.has_value() && upper_bu.has_value(); }
  bool one_sided() const { return lower_bl.has_value() != upper_bu.has_value(); }

  /// Half-width (b_u - b_l) / 2.  Throws OneSidedWindow unless two-sided.
  double radius() const;
  /// Center (b_l + b_u) / 2.  Throws OneSidedWindow unless two-sided.
  double midpoint() const;

  /// Throws DegenerateWindow if no bound is finite, if lower > upper, or if a
  /// two-sided window is narrower than kMinRadius; throws Error on a <= 0 or
  /// non-finite inputs.
  void validate() const;
};

/// Derived response parameters for a two-sided window: the width-adjusted
/// slope and the peak normalization constant.
struct ResponseParams {
  double adjusted_slope = 0.0;  // a' = a + e^(1/r) - 1, capped at kMaxSlope
  double normalization = 1.0;   // A  = sigma(a' r)^(-2)
};

/// Numerically stable logistic function; total on [-inf, +inf].
double sigmoid(double x);

/// Monotone item response: sigma(a (theta - b)).
double p_capability(double theta, const CapabilityItem& item);

/// Adjusted slope and normalization for a two-sided window.
/// Throws OneSidedWindow / DegenerateWindow via validation.
ResponseParams derive_params(const PropensityWindow& window);

/// Raw two-factor response with explicit per-side slopes; an infinite bound
/// contributes a factor of exactly 1.  Pre: slopes > 0.
double p_propensity_unnormalized(double theta, const PropensityWindow& window,
                                 double slope_lower, double slope_upper);

/// Normalized band response.  Peaks at exactly 1 at the window midpoint;
/// one-sided windows reduce exactly to the monotone model (rising for a
/// missing upper bound, falling mirror for a missing lower bound).
double p_propensity(double theta, const PropensityWindow& window);

/// Closed form for the response at either bound of a two-sided window:
///   P = 1 / (2 [sigma(a'r)^2 + (1 - sigma(a'r))^2]).
/// Lies in (0.5, ~0.5657] for a = 1 and tends to 0.5 as r -> 0+ or r -> inf.
double boundary_probability(const PropensityWindow& window);

}  // namespace idealband
