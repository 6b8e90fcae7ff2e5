#include "coarsen/margin.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace coarsen {

namespace {

constexpr double kLogExcessMin = -25.0;  // a - 2 >= 1e-11
constexpr double kLogExcessMax = 25.0;
constexpr int kGoldenSteps = 120;

double log_bound_at(double alpha, double horizon, int gap, double log_starts) {
  const double log_r = std::log(3.0) - std::log1p(alpha);
  const double log_tail = -std::log1p(-std::exp(log_r));  // 1 / (1 - r)
  return log_starts + alpha * horizon + gap * log_r + log_tail;
}

}  // namespace

InfluenceBound boundary_influence_bound(double horizon, int inner_half_width, int outer_half_width) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (inner_half_width < 0) throw std::invalid_argument("inner half-width must be >= 0");
  if (outer_half_width <= inner_half_width) throw std::invalid_argument("outer half-width must exceed inner half-width");
  const int gap = outer_half_width - inner_half_width;
  const double log_starts = std::log(influence_start_count(outer_half_width));
  // The log-bound is convex in a on (2, inf), hence unimodal in x = log(a - 2).
  auto at = [&](double x) { return log_bound_at(2.0 + std::exp(x), horizon, gap, log_starts); };
  double lo = kLogExcessMin, hi = kLogExcessMax;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = at(x1), f2 = at(x2);
  for (int k = 0; k < kGoldenSteps; ++k) {
    if (f1 < f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - g * (hi - lo), f1 = at(x1);
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + g * (hi - lo), f2 = at(x2);
    }
  }
  const double x = f1 < f2 ? x1 : x2;
  InfluenceBound out;
  out.alpha = 2.0 + std::exp(x);
  out.log_value = std::min(f1, f2);
  out.value = std::exp(out.log_value);
  return out;
}

int compute_safe_margin(double horizon, double eps, int inner_half_width) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0, 1)");
  if (inner_half_width < 0) throw std::invalid_argument("inner half-width must be >= 0");
  const double log_eps = std::log(eps);
  for (int outer = inner_half_width + 1; outer <= kMaxMargin; ++outer)
    if (boundary_influence_bound(horizon, inner_half_width, outer).log_value < log_eps) return outer;
  throw MarginNotFound("no margin up to " + std::to_string(kMaxMargin) + " meets the bound");
}

}  // namespace coarsen
