#include <doctest.h>

#include <boost/math/distributions/poisson.hpp>

#include <cmath>
#include <random>

#include "coarsen/engine.hpp"
#include "coarsen/observables.hpp"
#include "coarsen/stats.hpp"
#include "coarsen/trials.hpp"

using namespace coarsen;

namespace {

/// Straightforward re-implementation of one ring through the public neighbor API.
SpinConfig reference_run(const ProcessSpec& spec, SpinConfig c, std::span<const RingEvent> events) {
  const Lattice lat(spec.box, spec.boundary);
  for (const auto& e : spec.freeze.entries())
    if (e.start == 0.0)
      for (auto s : e.region.sites()) c.set(s, e.value);
  for (const auto& ev : events) {
    const Site x = spec.box.site(ev.site);
    if (spec.freeze.frozen_value(x, ev.time)) continue;
    std::vector<Spin> ns;
    for (const auto& r : lat.neighbors(x))
      ns.push_back(std::holds_alternative<Site>(r) ? c.at(std::get<Site>(r)) : std::get<Spin>(r));
    c.set(x, majority_update(c.at(x), ns, ev.coin));
  }
  return c;
}

}  // namespace

TEST_CASE("SplitMix64 reference outputs") {
  SplitMix64 g(1234567);
  CHECK(g() == 6457827717110365317ULL);
  CHECK(g() == 3203168211198807973ULL);
  CHECK(g() == 9817491932198370423ULL);
  CHECK(splitmix64(0) == mix64(kGolden));
}

TEST_CASE("ring count on 9 sites over horizon 100 is Poisson(900)") {
  const auto rec = generate_randomness(Box::centered(1), 100.0, 42);
  CHECK(std::abs(static_cast<double>(rec.events.size()) - 900.0) <= 3.0 * 30.0);
  for (std::size_t k = 1; k < rec.events.size(); ++k) CHECK(rec.events[k - 1].time < rec.events[k].time);
  CHECK(rec.events.back().time <= 100.0);
  CHECK_THROWS(generate_randomness(Box::centered(1), 0.0, 1));
}

TEST_CASE("same seed gives bit-identical records, different seeds differ") {
  const auto a = generate_randomness(Box::centered(3), 5.0, 9);
  const auto b = generate_randomness(Box::centered(3), 5.0, 9);
  const auto c = generate_randomness(Box::centered(3), 5.0, 10);
  CHECK(a.events == b.events);
  CHECK_FALSE(a.events == c.events);
}

TEST_CASE("per-site ring counts are Poisson(T) (chi-square over 10^4 sites)") {
  const Box box(Site{0, 0}, Site{99, 99});
  const double T = 2.0;
  const auto rec = generate_randomness(box, T, 2024);
  std::vector<int> per_site(box.size(), 0);
  for (const auto& e : rec.events) ++per_site[e.site];
  const int top = 8;  // bins 0..7 and >= 8
  std::vector<double> observed(top + 1, 0.0), expected(top + 1, 0.0);
  for (int c : per_site) ++observed[std::min(c, top)];
  boost::math::poisson_distribution<> law(T);
  for (int k = 0; k < top; ++k) expected[k] = box.size() * boost::math::pdf(law, k);
  expected[top] = box.size() * boost::math::cdf(boost::math::complement(law, top - 1));
  const auto chi = chi_square_gof(observed, expected, top);
  INFO("chi2=" << chi.statistic << " p=" << chi.p_value);
  CHECK(chi.p_value >= 0.01);
}

TEST_CASE("per-site inter-ring gaps are Exponential(1) (KS)") {
  SUBCASE("single site") {
    const auto rec = generate_randomness(Box(Site{0, 0}, Site{0, 0}), 100000.0, 7);
    std::vector<double> gaps;
    double last = 0.0;
    for (const auto& e : rec.events) {
      gaps.push_back(e.time - last);
      last = e.time;
    }
    REQUIRE(gaps.size() > 99000);
    const auto ks = ks_test(gaps, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); });
    INFO("D=" << ks.statistic << " p=" << ks.p_value);
    CHECK(ks.p_value >= 0.01);
  }
  SUBCASE("one site out of a superposed stream of 25") {
    const Box box = Box::centered(2);
    const auto rec = generate_randomness(box, 100000.0, 8);
    std::vector<double> gaps;
    double last = 0.0;
    const auto watched = box.index(kOrigin);
    for (const auto& e : rec.events)
      if (e.site == watched) {
        gaps.push_back(e.time - last);
        last = e.time;
      }
    REQUIRE(gaps.size() > 99000);
    const auto ks = ks_test(gaps, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); });
    CHECK(ks.p_value >= 0.01);
  }
}

TEST_CASE("coins are fair and independent of the site") {
  const auto rec = generate_randomness(Box::centered(5), 200.0, 3);
  std::uint64_t plus = 0;
  for (const auto& e : rec.events) plus += e.coin == Spin::Plus;
  const double n = static_cast<double>(rec.events.size());
  CHECK(std::abs(plus - n / 2) <= 3.0 * std::sqrt(n / 4));
}

TEST_CASE("engine agrees with a direct neighbor-list implementation") {
  const std::vector<Box> boxes{Box::centered(1), Box::centered(3), Box(Site{-2, 0}, Site{4, 2}), Box(Site{0, 0}, Site{0, 4}),
                               Box(Site{0, 0}, Site{5, 0})};
  std::uint64_t seed = 100;
  for (const auto& box : boxes)
    for (auto bc : {Boundary::Periodic, Boundary::FixedPlus, Boundary::FixedMinus, Boundary::Free}) {
      if (bc == Boundary::Periodic && (box.width() < 3 || box.height() < 3)) continue;
      ProcessSpec spec{box, bc, InitSpec{0.4, {}}, {}};
      if (box.contains(kOrigin)) spec.freeze = FreezeSchedule({{Region::single(kOrigin), Spin::Minus, 0.0, 3.0}});
      const auto rec = generate_randomness(box, 8.0, ++seed);
      const auto traj = run(spec, rec);
      CAPTURE(to_string(bc));
      CHECK(traj.final_config == reference_run(spec, initial_config(spec, rec.seed), rec.events));
    }
}

TEST_CASE("consensus is absorbing under a fixed-plus boundary") {
  const ProcessSpec spec{Box::centered(3), Boundary::FixedPlus, InitSpec{1.0, {}}, {}};
  const auto traj = run(spec, generate_randomness(spec.box, 50.0, 1));
  CHECK(traj.steps.size() > 1000);
  CHECK(traj.flip_count() == 0);
}

TEST_CASE("a single minus island flips at its first ring and nothing else moves") {
  const Box box = Box::centered(3);
  const ProcessSpec spec{box, Boundary::Periodic, InitSpec{1.0, {}}, {}};
  SpinConfig init(box, Spin::Plus);
  init.set(kOrigin, Spin::Minus);
  const auto traj = run_from(spec, init, generate_randomness(box, 20.0, 4));
  const auto origin = box.index(kOrigin);
  bool seen = false;
  for (const auto& s : traj.steps) {
    if (s.event.site == origin && !seen) {
      CHECK(s.step.before == Spin::Minus);
      CHECK(s.step.after == Spin::Plus);
      seen = true;
    } else {
      CHECK_FALSE(s.step.flipped());
    }
  }
  CHECK(seen);
  CHECK(traj.final_config == SpinConfig(box, Spin::Plus));
}

TEST_CASE("rings at a frozen origin leave the configuration unchanged") {
  const Box box = Box::centered(2);
  const ProcessSpec spec{box, Boundary::Periodic, InitSpec{0.0, {}}, FreezeSchedule::origin_plus()};
  const auto traj = run(spec, generate_randomness(box, 30.0, 5));
  CHECK(traj.initial.at(kOrigin) == Spin::Plus);
  CHECK(traj.overwrites.size() == 1);
  CHECK(traj.overwrites[0].after_event == 0);
  CHECK(traj.conflicting_onsets() == 0);
  int origin_rings = 0;
  for (const auto& s : traj.steps)
    if (s.event.site == box.index(kOrigin)) {
      ++origin_rings;
      CHECK(s.step.frozen);
      CHECK_FALSE(s.step.flipped());
    }
  CHECK(origin_rings > 5);
  CHECK(traj.final_config.at(kOrigin) == Spin::Plus);
}

TEST_CASE("frozen sites hold their value throughout every freeze interval") {
  const Box box = Box::centered(3);
  const FreezeSchedule sched({{Region::of(Box::centered(1)), Spin::Plus, 0.0, 4.0},
                              {Region::single({2, 2}), Spin::Minus, 1.5, 6.0},
                              {Region::single(kOrigin), Spin::Plus, 0.0, kForever}});
  const ProcessSpec spec{box, Boundary::Periodic, InitSpec{}, sched};
  const auto traj = run(spec, generate_randomness(box, 10.0, 6));
  SpinConfig c = traj.initial;
  std::size_t ow = 0;
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    while (ow < traj.overwrites.size() && traj.overwrites[ow].after_event == k) {
      c[traj.overwrites[ow].site] = traj.overwrites[ow].to;
      ++ow;
    }
    const auto& s = traj.steps[k];
    c[s.event.site] = s.step.after;
    for (const auto& e : sched.entries())
      if (e.start <= s.event.time && s.event.time <= e.end)
        for (auto site : e.region.sites()) CHECK(c.at(site) == e.value);
  }
}

TEST_CASE("a mid-run onset against the current spin is overwritten and flagged") {
  const Box box = Box::centered(2);
  const ProcessSpec spec{box, Boundary::FixedPlus, InitSpec{1.0, {}},
                         FreezeSchedule({{Region::single({1, 0}), Spin::Minus, 1.0, 2.0}})};
  const auto traj = run(spec, generate_randomness(box, 5.0, 7));
  REQUIRE(traj.overwrites.size() == 1);
  CHECK(traj.overwrites[0].after_event > 0);
  CHECK(traj.overwrites[0].from == Spin::Plus);
  CHECK(traj.overwrites[0].to == Spin::Minus);
  CHECK(traj.conflicting_onsets() == 1);
}

TEST_CASE("standard coupling: the origin-frozen run dominates the free run at every event") {
  const Box box = Box::centered(4);
  const ProcessSpec plain{box, Boundary::Periodic, InitSpec{}, {}};
  const ProcessSpec primed{box, Boundary::Periodic, InitSpec{}, FreezeSchedule::origin_plus()};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto cr = run_coupled({plain, primed}, generate_randomness(box, 20.0, seed));
    SpinConfig lo = cr.trajectories[0].initial, hi = cr.trajectories[1].initial;
    CHECK(domination_violations(hi, lo) == 0);
    for (std::size_t k = 0; k < cr.record.events.size(); ++k) {
      lo[cr.record.events[k].site] = cr.trajectories[0].steps[k].step.after;
      hi[cr.record.events[k].site] = cr.trajectories[1].steps[k].step.after;
      REQUIRE(domination_violations(hi, lo) == 0);
    }
  }
}

TEST_CASE("standard coupling: box-then-origin freezing dominates the origin-frozen run") {
  const Box box = Box::centered(4);
  const double T = 3.0;
  const ProcessSpec tilde{box, Boundary::Periodic, forced_plus_box(2), FreezeSchedule::box_then_origin(2, T)};
  const ProcessSpec primed{box, Boundary::Periodic, forced_plus_box(2), FreezeSchedule::origin_plus()};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto cr = run_coupled({tilde, primed}, generate_randomness(box, 15.0, seed));
    SpinConfig a = cr.trajectories[0].initial, b = cr.trajectories[1].initial;
    for (std::size_t k = 0; k < cr.record.events.size(); ++k) {
      a[cr.record.events[k].site] = cr.trajectories[0].steps[k].step.after;
      b[cr.record.events[k].site] = cr.trajectories[1].steps[k].step.after;
      REQUIRE(domination_violations(a, b) == 0);
    }
  }
}

TEST_CASE("identical specs give identical coupled trajectories") {
  const Box box = Box::centered(3);
  const ProcessSpec spec{box, Boundary::Periodic, InitSpec{}, FreezeSchedule::origin_plus()};
  const auto cr = run_coupled({spec, spec}, generate_randomness(box, 10.0, 3));
  CHECK(cr.trajectories[0].final_config == cr.trajectories[1].final_config);
  CHECK(cr.trajectories[0].flip_count() == cr.trajectories[1].flip_count());
}

TEST_CASE("coupled runs reject mismatched boxes and initial laws") {
  const ProcessSpec a{Box::centered(3), Boundary::Periodic, InitSpec{}, {}};
  const ProcessSpec b{Box::centered(4), Boundary::Periodic, InitSpec{}, {}};
  const ProcessSpec c{Box::centered(3), Boundary::Periodic, forced_plus_box(1), {}};
  const auto rec = generate_randomness(a.box, 1.0, 1);
  CHECK_THROWS(run_coupled({a, b}, rec));
  CHECK_THROWS(run_coupled({a, c}, rec));
  CHECK_THROWS(run(b, rec));
}

TEST_CASE("replay reproduces a trajectory and detects corruption") {
  const Box box = Box::centered(3);
  const ProcessSpec spec{box, Boundary::Periodic, InitSpec{}, FreezeSchedule::origin_plus()};
  const auto traj = run(spec, generate_randomness(box, 10.0, 11));
  const auto again = replay(traj);
  CHECK(again.final_config == traj.final_config);
  CHECK(again.steps.size() == traj.steps.size());

  auto bad_step = traj;
  for (auto& s : bad_step.steps)
    if (s.step.flipped()) {
      s.step.after = s.step.before;
      break;
    }
  CHECK_THROWS_AS(replay(bad_step), ReplayMismatch);

  auto bad_final = traj;
  bad_final.final_config[0] = flipped(bad_final.final_config[0]);
  CHECK_THROWS_AS(replay(bad_final), ReplayMismatch);

  auto bad_time = traj;
  std::swap(bad_time.steps[3].event.time, bad_time.steps[4].event.time);
  CHECK_THROWS_AS(replay(bad_time), ReplayMismatch);
}

TEST_CASE("serial and OpenMP trial fan-out return identical results") {
  const ProcessSpec spec{Box::centered(6), Boundary::Periodic, InitSpec{}, FreezeSchedule::origin_plus()};
  const Lattice lat(spec.box, spec.boundary);
  auto trial = [&](std::size_t, std::uint64_t seed) {
    Process p(spec, lat, initial_config(spec, seed));
    RingStream rings(lat.size(), seed, 5.0);
    FlipCounter fc(lat.size());
    drive(p, rings, fc);
    return fc.counts;
  };
  const auto a = run_trials_serial(40, 99, trial);
  const auto b = run_trials_parallel(40, 99, 4, trial);
  const auto c = run_trials(40, 99, 1, trial);
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 7) == splitmix64(5 ^ splitmix64(7)));
  CHECK(stream_seed(3, Stream::Initial) != stream_seed(3, Stream::Rings));
  // Reference value of splitmix64 (Vigna) for input 0.
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
}
