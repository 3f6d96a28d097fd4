#include "idealband/model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace idealband {

namespace {

/// exp(x) overflows double beyond this, so 1/r >= kExpArgMax means the
/// width boost saturates at kMaxSlope.
constexpr double kExpArgMax = 709.0;

void check_discrimination(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw Error("discrimination must be finite and > 0");
  }
}

}  // namespace

double PropensityWindow::radius() const {
  if (!two_sided()) throw OneSidedWindow("radius undefined for one-sided window");
  return (*upper_bu - *lower_bl) / 2.0;
}

double PropensityWindow::midpoint() const {
  if (!two_sided()) throw OneSidedWindow("midpoint undefined for one-sided window");
  return (*lower_bl + *upper_bu) / 2.0;
}

void PropensityWindow::validate() const {
  check_discrimination(base_discrimination_a);
  if (!lower_bl && !upper_bu) {
    throw DegenerateWindow("window has no finite bound");
  }
  if (lower_bl && !std::isfinite(*lower_bl)) {
    throw Error("lower bound must be finite when present");
  }
  if (upper_bu && !std::isfinite(*upper_bu)) {
    throw Error("upper bound must be finite when present");
  }
  if (two_sided()) {
    if (*lower_bl > *upper_bu) {
      throw DegenerateWindow("lower bound exceeds upper bound");
    }
    if (radius() < kMinRadius) {
      throw DegenerateWindow("window narrower than minimum radius");
    }
  }
}

double sigmoid(double x) {
  if (std::isnan(x)) return x;
  // Single exp of a non-positive argument: never overflows, and the
  // complement form keeps precision for large |x|.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double p_capability(double theta, const CapabilityItem& item) {
  assert(item.discrimination_a > 0.0);
  return sigmoid(item.discrimination_a * (theta - item.difficulty_b));
}

ResponseParams derive_params(const PropensityWindow& window) {
  window.validate();
  if (!window.two_sided()) {
    throw OneSidedWindow("derived parameters require a two-sided window");
  }
  const double a = window.base_discrimination_a;
  const double r = window.radius();
  const double inv_r = 1.0 / r;
  // Width boost e^(1/r) - 1, saturated so narrow windows stay finite.
  const double boost = inv_r >= kExpArgMax ? kMaxSlope : std::expm1(inv_r);
  const double adjusted = std::min(a + boost, std::max(a, kMaxSlope));
  const double s = sigmoid(adjusted * r);
  return ResponseParams{adjusted, 1.0 / (s * s)};
}

double p_propensity_unnormalized(double theta, const PropensityWindow& window,
                                 double slope_lower, double slope_upper) {
  assert(slope_lower > 0.0 && slope_upper > 0.0);
  const double rise =
      window.lower_bl ? sigmoid(slope_lower * (theta - *window.lower_bl)) : 1.0;
  const double fall =
      window.upper_bu ? sigmoid(slope_upper * (*window.upper_bu - theta)) : 1.0;
  return rise * fall;
}

double p_propensity(double theta, const PropensityWindow& window) {
  window.validate();
  const double a = window.base_discrimination_a;
  if (!window.two_sided()) {
    // Exact monotone reduction: the infinite side contributes a factor of 1
    // and no adjustment or normalization applies.
    return window.lower_bl ? sigmoid(a * (theta - *window.lower_bl))
                           : sigmoid(a * (*window.upper_bu - theta));
  }
  const ResponseParams params = derive_params(window);
  const double r = window.radius();
  // Evaluate in offsets from the midpoint so the peak (u = 0) and the
  // mirror symmetry u <-> -u are exact in floating point: at u = 0 the
  // numerator and denominator are the same double, so p is exactly 1.
  const double u = theta - window.midpoint();
  const double s = sigmoid(params.adjusted_slope * r);
  const double p = (sigmoid(params.adjusted_slope * (u + r)) *
                    sigmoid(params.adjusted_slope * (r - u))) /
                   (s * s);
  return std::clamp(p, 0.0, 1.0);
}

double boundary_probability(const PropensityWindow& window) {
  const ResponseParams params = derive_params(window);
  const double x = params.adjusted_slope * window.radius();
  const double s = sigmoid(x);
  const double c = sigmoid(-x);  // exact complement of s
  return 1.0 / (2.0 * (s * s + c * c));
}

}  // namespace idealband
