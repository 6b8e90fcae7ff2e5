#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numeric>

#include "coarsen/engine.hpp"
#include "coarsen/observables.hpp"
#include "coarsen/oracle.hpp"
#include "coarsen/stats.hpp"
#include "coarsen/trials.hpp"

using namespace coarsen;

namespace {

/// Rates written out from the update rule itself: each site rings at rate 1
/// and moves to majority_update(current, neighbors, coin) with a fair coin.
std::vector<std::vector<double>> brute_rates(const ProcessSpec& spec) {
  const Lattice lat(spec.box, spec.boundary);
  const std::size_t n = spec.box.size(), states = std::size_t{1} << n;
  std::vector<std::vector<double>> r(states, std::vector<double>(states, 0.0));
  for (StateIndex u = 0; u < states; ++u) {
    const SpinConfig c = decode(u, spec.box);
    for (std::uint32_t i = 0; i < n; ++i) {
      const Site s = spec.box.site(i);
      if (spec.freeze.frozen_value(s, 0.0)) continue;
      std::vector<Spin> nb;
      for (const auto& ref : lat.neighbors(s))
        nb.push_back(std::holds_alternative<Site>(ref) ? c.at(std::get<Site>(ref)) : std::get<Spin>(ref));
      for (auto coin : {Spin::Plus, Spin::Minus}) {
        const Spin next = nb.empty() ? coin : majority_update(c[i], nb, coin);
        if (next == c[i]) continue;
        const StateIndex v = u ^ (StateIndex{1} << i);
        r[u][v] += 0.5;
        r[u][u] -= 0.5;
      }
    }
  }
  return r;
}

double total(const std::vector<double>& p) { return std::accumulate(p.begin(), p.end(), 0.0); }

ProcessSpec small(Boundary bc, InitSpec init = {}, FreezeSchedule f = {}) {
  return ProcessSpec{Box::centered(1), bc, std::move(init), std::move(f)};
}

}  // namespace

TEST_CASE("state encoding round trip") {
  const Box box = Box::centered(1);
  for (StateIndex u = 0; u < 512; ++u) CHECK(encode(decode(u, box)) == u);
  SpinConfig c(box, Spin::Minus);
  c.set({-1, -1}, Spin::Plus);
  CHECK(encode(c) == 1U);
  CHECK_THROWS(decode(0, Box::centered(2)));
}

TEST_CASE("generator matches a brute-force construction") {
  const FreezeSchedule frozen_origin = FreezeSchedule::origin_plus();
  const std::vector<ProcessSpec> specs{
      small(Boundary::Periodic), small(Boundary::FixedPlus), small(Boundary::FixedMinus), small(Boundary::Free),
      small(Boundary::FixedMinus, {}, frozen_origin),
      ProcessSpec{Box(Site{0, 0}, Site{2, 1}), Boundary::Free, InitSpec{}, {}},
      ProcessSpec{Box(Site{0, 0}, Site{3, 2}), Boundary::Periodic, InitSpec{}, {}}};
  for (const auto& spec : specs) {
    const auto q = build_generator(spec);
    const auto r = brute_rates(spec);
    double worst = 0.0;
    for (StateIndex u = 0; u < q.states(); ++u) {
      double row = 0.0;
      for (StateIndex v = 0; v < q.states(); ++v) {
        worst = std::max(worst, std::abs(q.at(u, v) - r[u][v]));
        row += q.at(u, v);
      }
      CHECK(std::abs(row) < 1e-12);
      CHECK(q.exit_rate(u) <= static_cast<double>(q.sites()) + 1e-12);
    }
    CHECK(worst == 0.0);
  }
}

TEST_CASE("absorbing states and frozen sites") {
  const auto torus = build_generator(small(Boundary::Periodic));
  CHECK(torus.exit_rate(511) == 0.0);  // all plus
  CHECK(torus.exit_rate(0) == 0.0);    // all minus
  const auto q = build_generator(small(Boundary::FixedMinus, {}, FreezeSchedule::origin_plus()));
  const StateIndex origin_bit = StateIndex{1} << Box::centered(1).index(kOrigin);
  for (StateIndex u = 0; u < q.states(); ++u) CHECK(q.at(u, u ^ origin_bit) == 0.0);
}

TEST_CASE("single site between minus spins flips at rate one") {
  const ProcessSpec spec{Box(Site{0, 0}, Site{0, 0}), Boundary::FixedMinus, InitSpec{1.0, {}}, {}};
  const auto q = build_generator(spec);
  for (double T : {0.1, 1.0, 3.0}) {
    const double p = hitting_probability(q, point_mass(SpinConfig(spec.box, Spin::Plus)),
                                         [](StateIndex u) { return u == 0; }, T);
    CHECK(p == doctest::Approx(1.0 - std::exp(-T)).epsilon(1e-10));
  }
}

TEST_CASE("transient law: trivial cases") {
  const auto spec = small(Boundary::FixedMinus);
  const auto q = build_generator(spec);
  const auto init = initial_law(spec);
  CHECK(total(init) == doctest::Approx(1.0));
  CHECK(transient_distribution(q, init, 0.0).distribution == init);

  const auto torus = build_generator(small(Boundary::Periodic));
  const auto pm = point_mass(SpinConfig(Box::centered(1), Spin::Plus));
  const auto stay = transient_distribution(torus, pm, 5.0).distribution;
  CHECK(stay[511] == doctest::Approx(1.0).epsilon(1e-12));

  const ProcessSpec all_frozen{Box::centered(1), Boundary::FixedMinus, InitSpec{},
                               FreezeSchedule({{Region::of(Box::centered(1)), Spin::Plus, 0.0, kForever}})};
  const auto z = build_generator(all_frozen);
  CHECK(z.is_zero());
  CHECK(transient_distribution(z, init, 3.0).distribution == init);

  const auto r = transient_distribution(q, init, 2.0);
  CHECK(total(r.distribution) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.truncation_error < 1e-11);
  CHECK(std::all_of(r.distribution.begin(), r.distribution.end(), [](double x) { return x >= -1e-15; }));
}

TEST_CASE("semigroup property") {
  const auto spec = small(Boundary::Free);
  const auto q = build_generator(spec);
  const auto init = initial_law(spec);
  const auto direct = transient_distribution(q, init, 1.3).distribution;
  const auto half = transient_distribution(q, init, 0.5).distribution;
  const auto composed = transient_distribution(q, half, 0.8).distribution;
  for (std::size_t u = 0; u < direct.size(); ++u) CHECK(std::abs(direct[u] - composed[u]) < 1e-11);
}

TEST_CASE("four neighbors of a forced origin on the 3x3 torus are exchangeable") {
  const Box box = Box::centered(1);
  const ProcessSpec origin_only{box, Boundary::Periodic, InitSpec{0.7, {ForcedRegion::uniform(Region::single(kOrigin), Spin::Plus)}}, {}};
  const auto q = build_generator(origin_only);
  const auto p = transient_distribution(q, initial_law(origin_only), 1.0).distribution;
  std::array<double, 4> minus{};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto bit = StateIndex{1} << box.index(kOrigin + offset(kDirections[k]));
    for (StateIndex u = 0; u < p.size(); ++u)
      if (!(u & bit)) minus[k] += p[u];
  }
  CHECK(minus[0] > 0.05);
  for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(minus[k] - minus[0]) < 1e-10);
}

TEST_CASE("hitting probability edge cases") {
  const auto spec = small(Boundary::FixedPlus);
  const auto q = build_generator(spec);
  const auto all_plus = point_mass(SpinConfig(spec.box, Spin::Plus));
  CHECK(hitting_probability(q, all_plus, [](StateIndex u) { return u == 0; }, 10.0) == 0.0);
  CHECK(hitting_probability(q, all_plus, [](StateIndex u) { return u == 511; }, 10.0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto init = initial_law(spec);
  const auto everything = hitting_probability(q, init, [](StateIndex) { return true; }, 1.0);
  CHECK(everything == doctest::Approx(1.0));
  // Hitting by T is at least the marginal at T and nondecreasing in T.
  const auto target = [](StateIndex u) { return (u & (StateIndex{1} << 4)) == 0; };
  double prev = 0.0;
  for (double T : {0.0, 0.5, 1.0, 2.0}) {
    const double h = hitting_probability(q, init, target, T);
    const auto p = transient_distribution(q, init, T).distribution;
    double marginal = 0.0;
    for (StateIndex u = 0; u < p.size(); ++u)
      if (target(u)) marginal += p[u];
    CHECK(h >= marginal - 1e-12);
    CHECK(h >= prev - 1e-12);
    prev = h;
  }
}

TEST_CASE("serial and parallel kernels agree") {
  const ProcessSpec spec{Box(Site{0, 0}, Site{3, 2}), Boundary::FixedMinus, InitSpec{}, {}};
  const auto q = build_generator(spec);
  const auto init = initial_law(spec);
  std::vector<bool> absorbing(q.states());
  for (StateIndex u = 0; u < q.states(); ++u) absorbing[u] = (u % 7) == 0;
  for (const std::vector<bool>* mask : std::array<const std::vector<bool>*, 2>{nullptr, &absorbing}) {
    std::vector<double> a(q.states()), b(q.states());
    uniformized_step_serial(q, 12.0, init, a, mask);
    uniformized_step_parallel(q, 12.0, init, b, mask);
    for (std::size_t u = 0; u < a.size(); ++u) CHECK(std::abs(a[u] - b[u]) < 1e-15);
    const auto ts = transient_distribution(q, init, 0.7, Exec::Serial, mask).distribution;
    const auto tp = transient_distribution(q, init, 0.7, Exec::Parallel, mask).distribution;
    for (std::size_t u = 0; u < ts.size(); ++u) CHECK(std::abs(ts[u] - tp[u]) < 1e-14);
  }
}

TEST_CASE("Erlang tail: exact values and the exponential bound") {
  CHECK(erlang_cdf(1, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  const auto c = erlang_tail_check(3, 1.0, 2.0);
  CHECK(c.exact == doctest::Approx(1.0 - 2.5 * std::exp(-1.0)).epsilon(1e-13));
  CHECK(c.exact == doctest::Approx(0.0803014).epsilon(1e-6));
  CHECK(c.bound == doctest::Approx(std::exp(2.0) / 27.0).epsilon(1e-13));
  CHECK(c.bound == doctest::Approx(0.273672).epsilon(1e-5));
  CHECK(erlang_cdf(4, 0.0) == 0.0);
  CHECK_THROWS(erlang_cdf(0, 1.0));
  CHECK_THROWS(erlang_tail_check(2, 1.0, 0.0));
}

TEST_CASE("Erlang CDF agrees with the regularized incomplete gamma") {
  for (int m = 1; m <= 60; m += 3)
    for (double T : {0.01, 0.3, 1.0, 4.0, 12.5, 40.0}) {
      const double want = boost::math::gamma_p(static_cast<double>(m), T);
      const double got = erlang_cdf(m, T);
      CAPTURE(m);
      CAPTURE(T);
      CHECK(std::abs(got - want) <= 1e-12 + 1e-10 * want);
      for (double a : {1e-9, 0.5, 3.0}) CHECK(erlang_tail_check(m, T, a).bound >= got * (1 - 1e-12));
    }
  // alpha -> 0 makes the bound tend to 1.
  CHECK(erlang_tail_check(5, 2.0, 1e-12).bound == doctest::Approx(1.0));
}

TEST_CASE("piecewise schedule agrees with simulation") {
  const Box box = Box::centered(1);
  const ProcessSpec spec{box, Boundary::FixedMinus, InitSpec{},
                         FreezeSchedule({{Region::single(kOrigin), Spin::Plus, 0.0, 0.5}})};
  const double T = 1.0;
  const auto target_bit = StateIndex{1} << box.index(kOrigin);
  const double exact =
      hitting_probability_piecewise(spec, initial_law(spec), [&](StateIndex u) { return !(u & target_bit); }, T);
  // Origin is pinned for half the horizon, so it sits strictly between the free and pinned-forever values.
  CHECK(exact > 0.05);
  CHECK(exact < 0.95);
  // Dense matrix exponential of the same chain, computed separately.
  CHECK(exact == doctest::Approx(0.24329314883).epsilon(1e-8));

  const std::size_t n = 40000;
  const auto outcomes = run_trials(n, 99, available_threads(), [&](std::size_t, std::uint64_t seed) {
    return detect(run(spec, generate_randomness(box, T, seed)), FirstPassage{kOrigin, Spin::Minus});
  });
  // Never reaching -1 within the horizon is reported as censored; here that is exactly "not hit by T".
  const auto est = estimate_conservative(outcomes);
  CHECK(est.n == n);
  CAPTURE(exact);
  CAPTURE(est.p_hat);
  CHECK(est.ci.contains(exact));
}

TEST_CASE("piecewise law at the onset moves mass onto frozen values") {
  const Box box = Box::centered(1);
  const ProcessSpec spec{box, Boundary::FixedMinus, InitSpec{},
                         FreezeSchedule({{Region::single({1, 1}), Spin::Plus, 0.4, kForever}})};
  const auto bit = StateIndex{1} << box.index({1, 1});
  const auto p = transient_piecewise(spec, initial_law(spec), 0.6).distribution;
  double minus = 0.0;
  for (StateIndex u = 0; u < p.size(); ++u)
    if (!(u & bit)) minus += p[u];
  CHECK(minus < 1e-12);
  CHECK(total(p) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("oracle size limit and initial law") {
  CHECK_THROWS(build_generator(ProcessSpec{Box(Site{0, 0}, Site{12, 0}), Boundary::Free, InitSpec{}, {}}));
  CHECK_NOTHROW(build_generator(ProcessSpec{Box(Site{0, 0}, Site{11, 0}), Boundary::Free, InitSpec{}, {}}));

  const Box box = Box::centered(1);
  const ProcessSpec spec{box, Boundary::Periodic, InitSpec{0.7, {ForcedRegion{Region::single(kOrigin), {Spin::Minus}}}}, {}};
  const auto p = initial_law(spec);
  CHECK(total(p) == doctest::Approx(1.0));
  const auto bit = StateIndex{1} << box.index(kOrigin);
  double plus_origin = 0.0, plus_corner = 0.0;
  for (StateIndex u = 0; u < p.size(); ++u) {
    if (u & bit) plus_origin += p[u];
    if (u & 1U) plus_corner += p[u];
  }
  CHECK(plus_origin == 0.0);
  CHECK(plus_corner == doctest::Approx(0.7));
}
