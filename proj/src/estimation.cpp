#include "idealband/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace idealband {

namespace {

void check_config(const FitConfig& c) {
  if (!(c.theta_min < c.theta_max) || !(c.grid_step > 0.0) ||
      !(c.tolerance > 0.0) || c.max_iterations < 1 || !(c.clamp_eps > 0.0) ||
      !(c.clamp_eps < 0.5)) {
    throw Error("invalid fit config");
  }
}

template <typename Item>
void check_aligned(const std::vector<Item>& items,
                   const std::vector<OutcomeRecord>& outcomes) {
  if (items.empty()) throw EmptyData("no items to fit");
  if (items.size() != outcomes.size()) {
    throw Error("items and outcomes must be aligned");
  }
}

double clamp_prob(double p, double eps) {
  return std::clamp(p, eps, 1.0 - eps);
}

template <typename ResponseFn>
double bernoulli_loglik(double theta, std::size_t n, ResponseFn&& response,
                        const std::vector<OutcomeRecord>& outcomes,
                        const FitConfig& config) {
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = clamp_prob(response(theta, i), config.clamp_eps);
    ll += outcomes[i].success ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

/// Span of the item bank on the trait axis: [min finite bound, max finite
/// bound].  Every valid window has at least one finite bound.
std::pair<double, double> bound_span(const std::vector<PropensityWindow>& items) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& w : items) {
    if (w.lower_bl) {
      lo = std::min(lo, *w.lower_bl);
      hi = std::max(hi, *w.lower_bl);
    }
    if (w.upper_bu) {
      lo = std::min(lo, *w.upper_bu);
      hi = std::max(hi, *w.upper_bu);
    }
  }
  return {lo, hi};
}

std::pair<double, double> bound_span(const std::vector<CapabilityItem>& items) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& it : items) {
    lo = std::min(lo, it.difficulty_b);
    hi = std::max(hi, it.difficulty_b);
  }
  return {lo, hi};
}

std::vector<double> make_grid(double lo, double hi, double step) {
  std::vector<double> pts;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  pts.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) pts.push_back(lo + static_cast<double>(k) * step);
  if (pts.back() < hi - 1e-12 * std::max(1.0, std::abs(hi))) pts.push_back(hi);
  return pts;
}

/// Per-item candidate thetas for the initialization scan: every finite bound
/// plus each two-sided midpoint.  A band much narrower than the grid step
/// carves a likelihood basin the uniform grid can straddle without noticing;
/// its own anchor points always land inside it.
std::vector<double> anchor_points(const std::vector<PropensityWindow>& items) {
  std::vector<double> anchors;
  anchors.reserve(items.size() * 3);
  for (const auto& w : items) {
    if (w.lower_bl) anchors.push_back(*w.lower_bl);
    if (w.upper_bu) anchors.push_back(*w.upper_bu);
    if (w.two_sided()) anchors.push_back(w.midpoint());
  }
  return anchors;
}

std::vector<double> anchor_points(const std::vector<CapabilityItem>& items) {
  std::vector<double> anchors;
  anchors.reserve(items.size());
  for (const auto& it : items) anchors.push_back(it.difficulty_b);
  return anchors;
}

struct GridScan {
  std::vector<double> points;
  std::size_t best = 0;
};

/// Evaluates the objective over the initialization grid joined with the item
/// anchors and records the argmax; ties resolve to the smallest theta (the
/// candidates are scanned in ascending order and only strict improvement wins).
GridScan scan_grid(const std::function<double(double)>& objective,
                   double span_lo, double span_hi,
                   const std::vector<double>& anchors, const FitConfig& config) {
  const double lo = std::clamp(span_lo - 2.0, config.theta_min, config.theta_max);
  const double hi = std::clamp(span_hi + 2.0, config.theta_min, config.theta_max);
  GridScan scan;
  scan.points = make_grid(lo, hi, config.grid_step);
  for (const double a : anchors) {
    if (a >= lo && a <= hi) scan.points.push_back(a);
  }
  std::sort(scan.points.begin(), scan.points.end());
  scan.points.erase(std::unique(scan.points.begin(), scan.points.end()),
                    scan.points.end());
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const double v = objective(scan.points[i]);
    if (v > best_value) {
      best_value = v;
      scan.best = i;
    }
  }
  return scan;
}

/// Grid init, then safeguarded Newton on the numeric score inside the
/// bracketing cell, falling back to bisection whenever the Newton step
/// leaves the bracket or the curvature is not negative.
FitResult fit_scalar(const std::function<double(double)>& loglik,
                     double span_lo, double span_hi,
                     const std::vector<double>& anchors, std::size_t n_items,
                     const FitConfig& config) {
  auto safe = [&loglik](double t) {
    const double v = loglik(t);
    if (std::isnan(v)) throw NonFinite("log-likelihood is NaN");
    return v;
  };

  const GridScan scan = scan_grid(safe, span_lo, span_hi, anchors, config);
  const std::size_t best = scan.best;
  const double init = scan.points[best];
  double blo = best == 0 ? config.theta_min : scan.points[best - 1];
  double bhi = best + 1 == scan.points.size() ? config.theta_max
                                              : scan.points[best + 1];

  double x = init;
  bool converged = false;
  for (int it = 0; it < config.max_iterations; ++it) {
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    const double fm = safe(x - h);
    const double f0 = safe(x);
    const double fp = safe(x + h);
    const double d1 = (fp - fm) / (2.0 * h);
    const double d2 = (fp - 2.0 * f0 + fm) / (h * h);
    if (d1 > 0.0) {
      blo = x;
    } else if (d1 < 0.0) {
      bhi = x;
    } else {
      converged = true;  // numerically stationary
      break;
    }
    double xn;
    if (d2 < 0.0) {
      xn = x - d1 / d2;
      if (!(xn > blo && xn < bhi)) xn = 0.5 * (blo + bhi);
    } else {
      xn = 0.5 * (blo + bhi);
    }
    if (std::abs(xn - x) <= config.tolerance) {
      x = xn;
      converged = true;
      break;
    }
    x = xn;
  }
  x = std::clamp(x, config.theta_min, config.theta_max);

  FitResult result;
  result.theta_hat = x;
  result.log_likelihood = safe(x);
  result.n_items = n_items;
  result.converged = converged;
  result.init_theta = init;
  const double bound_slack = 10.0 * config.tolerance;
  result.at_bound = x <= config.theta_min + bound_slack ||
                    x >= config.theta_max - bound_slack;

  // Observed information from a central second difference at the optimum.
  const double h = 1e-4 * std::max(1.0, std::abs(x));
  const double curv = (safe(x + h) - 2.0 * result.log_likelihood + safe(x - h)) / (h * h);
  if (curv < 0.0) result.std_error = 1.0 / std::sqrt(-curv);
  return result;
}

}  // namespace

double log_likelihood(double theta, const std::vector<PropensityWindow>& items,
                      const std::vector<OutcomeRecord>& outcomes,
                      const FitConfig& config) {
  check_config(config);
  check_aligned(items, outcomes);
  return bernoulli_loglik(
      theta, items.size(),
      [&items](double t, std::size_t i) { return p_propensity(t, items[i]); },
      outcomes, config);
}

double log_likelihood(double theta, const std::vector<CapabilityItem>& items,
                      const std::vector<OutcomeRecord>& outcomes,
                      const FitConfig& config) {
  check_config(config);
  check_aligned(items, outcomes);
  return bernoulli_loglik(
      theta, items.size(),
      [&items](double t, std::size_t i) { return p_capability(t, items[i]); },
      outcomes, config);
}

double initialize_theta(const std::vector<PropensityWindow>& items,
                        const std::vector<OutcomeRecord>& outcomes,
                        const FitConfig& config) {
  check_config(config);
  check_aligned(items, outcomes);
  for (const auto& w : items) w.validate();
  const auto [lo, hi] = bound_span(items);
  auto ll = [&](double t) { return log_likelihood(t, items, outcomes, config); };
  const GridScan scan = scan_grid(ll, lo, hi, anchor_points(items), config);
  return scan.points[scan.best];
}

double initialize_theta(const std::vector<CapabilityItem>& items,
                        const std::vector<OutcomeRecord>& outcomes,
                        const FitConfig& config) {
  check_config(config);
  check_aligned(items, outcomes);
  const auto [lo, hi] = bound_span(items);
  auto ll = [&](double t) { return log_likelihood(t, items, outcomes, config); };
  const GridScan scan = scan_grid(ll, lo, hi, anchor_points(items), config);
  return scan.points[scan.best];
}

FitResult fit_propensity(const std::vector<PropensityWindow>& items,
                         const std::vector<OutcomeRecord>& outcomes,
                         const FitConfig& config) {
  check_config(config);
  check_aligned(items, outcomes);
  for (const auto& w : items) w.validate();
  const auto [lo, hi] = bound_span(items);
  auto ll = [&](double t) { return log_likelihood(t, items, outcomes, config); };
  return fit_scalar(ll, lo, hi, anchor_points(items), items.size(), config);
}

FitResult fit_capability(const std::vector<CapabilityItem>& items,
                         const std::vector<OutcomeRecord>& outcomes,
                         const FitConfig& config) {
  check_config(config);
  check_aligned(items, outcomes);
  for (const auto& it : items) {
    if (!(it.discrimination_a > 0.0)) throw Error("discrimination must be > 0");
  }
  const auto [lo, hi] = bound_span(items);
  auto ll = [&](double t) { return log_likelihood(t, items, outcomes, config); };
  return fit_scalar(ll, lo, hi, anchor_points(items), items.size(), config);
}

std::optional<double> empirical_point_collapse(
    const std::vector<PropensityWindow>& items,
    const std::vector<OutcomeRecord>& outcomes, double x) {
  check_aligned(items, outcomes);
  std::size_t covered = 0;
  double successes = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& w = items[i];
    const bool contains = (!w.lower_bl || *w.lower_bl <= x) &&
                          (!w.upper_bu || x <= *w.upper_bu);
    if (contains) {
      ++covered;
      successes += outcomes[i].success;
    }
  }
  if (covered == 0) return std::nullopt;
  return successes / static_cast<double>(covered);
}

std::map<std::pair<double, double>, double> empirical_surface(
    const std::vector<PropensityWindow>& items,
    const std::vector<OutcomeRecord>& outcomes) {
  check_aligned(items, outcomes);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::map<std::pair<double, double>, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::pair<double, double> key{items[i].lower_bl.value_or(-inf),
                                        items[i].upper_bu.value_or(inf)};
    auto& [sum, n] = acc[key];
    sum += outcomes[i].success;
    ++n;
  }
  std::map<std::pair<double, double>, double> out;
  for (const auto& [key, sn] : acc) {
    out[key] = sn.first / static_cast<double>(sn.second);
  }
  return out;
}

std::map<double, double> empirical_icc(
    const std::vector<CapabilityItem>& items,
    const std::vector<OutcomeRecord>& outcomes) {
  check_aligned(items, outcomes);
  std::map<double, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& [sum, n] = acc[items[i].difficulty_b];
    sum += outcomes[i].success;
    ++n;
  }
  std::map<double, double> out;
  for (const auto& [key, sn] : acc) {
    out[key] = sn.first / static_cast<double>(sn.second);
  }
  return out;
}

}  // namespace idealband
