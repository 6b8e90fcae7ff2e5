#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

#include "coarsen/margin.hpp"

using namespace coarsen;

namespace {

/// sum_{m >= m0} 3^m P(Erlang(m,1) < T), P from the regularized incomplete gamma.
double path_sum(int m0, double T) {
  double total = 0.0;
  for (int m = std::max(m0, 1); m < m0 + 4000; ++m) {
    const double term = std::exp(m * std::log(3.0) + std::log(boost::math::gamma_p(static_cast<double>(m), T)));
    total += term;
    if (term < total * 1e-18) break;
  }
  return total;
}

/// Chernoff bound summed in closed form, evaluated on a dense alpha grid.
double grid_bound(double T, int L, int Lp) {
  double best = INFINITY;
  for (double a = 2.001; a < 1e6; a *= 1.001) {
    const double r = 3.0 / (1.0 + a);
    const double v = (8.0 * Lp + 4.0) * std::exp(a * T + (Lp - L) * std::log(r)) / (1.0 - r);
    best = std::min(best, v);
  }
  return best;
}

}  // namespace

TEST_CASE("T=1, eps=1e-6, L=2: the margin's exact path sum is below eps") {
  const int Lp = compute_safe_margin(1.0, 1e-6, 2);
  CHECK(Lp > 2);
  CHECK(Lp < 100);
  CHECK((8.0 * Lp + 4.0) * path_sum(Lp - 2, 1.0) < 1e-6);
  // One less is not certified by the bound.
  CHECK(boundary_influence_bound(1.0, 2, Lp - 1).value >= 1e-6);
}

TEST_CASE("optimized bound matches a dense alpha grid") {
  for (double T : {0.01, 0.5, 1.0, 10.0})
    for (int Lp : {5, 12, 40}) {
      const auto b = boundary_influence_bound(T, 1, Lp);
      const double g = grid_bound(T, 1, Lp);
      CAPTURE(T);
      CAPTURE(Lp);
      CHECK(b.alpha > 2.0);
      CHECK(b.value <= g * (1 + 1e-6));
      CHECK(b.value >= g * (1 - 1e-3));
    }
}

TEST_CASE("the bound dominates the exact path sum") {
  for (double T : {0.1, 1.0, 5.0})
    for (int Lp : {4, 10, 30}) {
      const double exact = (8.0 * Lp + 4.0) * path_sum(Lp - 1, T);
      CHECK(exact <= boundary_influence_bound(T, 1, Lp).value);
    }
}

TEST_CASE("margin grows with the horizon") {
  int prev = 0;
  for (double T : {0.01, 0.5, 1.0, 10.0, 20.0, 50.0}) {
    const int Lp = compute_safe_margin(T, 1e-6, 2);
    CHECK(Lp >= prev);
    prev = Lp;
  }
  CHECK(compute_safe_margin(10.0, 1e-6, 2) >= compute_safe_margin(1.0, 1e-6, 2));
}

TEST_CASE("loose budget, short horizon gives a small margin") {
  const int Lp = compute_safe_margin(0.01, 0.5, 1);
  CHECK(Lp <= 10);
  CHECK(Lp > 1);
}

TEST_CASE("independently computed margins") {
  // Values from a separate evaluation of the same closed form.
  CHECK(compute_safe_margin(0.01, 1e-6, 2) == 7);
  CHECK(compute_safe_margin(1.0, 1e-6, 2) == 23);
  CHECK(compute_safe_margin(20.0, 1e-6, 2) == 167);
}

TEST_CASE("margin argument checks") {
  CHECK_THROWS(compute_safe_margin(0.0, 1e-6, 2));
  CHECK_THROWS(compute_safe_margin(1.0, 0.0, 2));
  CHECK_THROWS(compute_safe_margin(1.0, 1.0, 2));
  CHECK_THROWS(boundary_influence_bound(1.0, 3, 3));
  CHECK_THROWS_AS(compute_safe_margin(5e5, 1e-6, 1), MarginNotFound);
}
