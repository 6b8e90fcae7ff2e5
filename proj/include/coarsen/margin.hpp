#ifndef COARSEN_MARGIN_HPP
#define COARSEN_MARGIN_HPP

#include <stdexcept>

namespace coarsen {

/// Upper bound on the probability that influence from outside {-L'..L'}^2
/// reaches {-L..L}^2 within [0, T], when the outer box starts all plus.
///
///   starts(L') * sum_{m >= L'-L} 3^m e^{aT} / (1+a)^m
///     = starts(L') * e^{aT} r^{L'-L} / (1 - r),   r = 3 / (1+a),
///
/// minimized over a > 2 by golden-section search in log(a - 2).
/// starts(L') = 8L' + 4 counts the sites just outside the box, each a possible
/// start of an influence path; a path has at most 3 choices per step.
struct InfluenceBound {
  double value = 0.0;  // may exceed 1 for small margins
  double log_value = 0.0;
  double alpha = 0.0;
};

InfluenceBound boundary_influence_bound(double horizon, int inner_half_width, int outer_half_width);

/// Path starting points counted by the bound.
inline double influence_start_count(int outer_half_width) { return 8.0 * outer_half_width + 4.0; }

class MarginNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxMargin = 1'000'000;

/// Smallest half-width L' > L whose boundary influence bound on {-L..L}^2 up to
/// time T is below eps. A periodic box of that half-width emulates the
/// infinite lattice for observables inside {-L..L}^2 up to time T, except
/// on an event of probability < eps. Throws MarginNotFound past kMaxMargin.
int compute_safe_margin(double horizon, double eps, int inner_half_width);

}  // namespace coarsen

#endif  // COARSEN_MARGIN_HPP
