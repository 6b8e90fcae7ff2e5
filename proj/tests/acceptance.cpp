// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <boost/math/distributions/poisson.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "coarsen/experiments.hpp"
#include "coarsen/oracle.hpp"
#include "coarsen/randomness.hpp"
#include "coarsen/stats.hpp"
#include "coarsen/trials.hpp"

using namespace coarsen;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(COARSEN_SOURCE_DIR) / "configs";

struct Line {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  std::string s(static_cast<std::size_t>(std::snprintf(nullptr, 0, f, args...)), '\0');
  std::snprintf(s.data(), s.size() + 1, f, args...);
  return s;
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

ExperimentResult run_config(json j, int jobs) { return run_experiment(parse_config(j), RunOptions{jobs}); }

const BoundCheck& find_check(const ExperimentResult& r, const std::string& needle) {
  for (const auto& c : r.checks)
    if (c.name.find(needle) != std::string::npos) return c;
  throw std::runtime_error("no check matching '" + needle + "' in " + r.experiment);
}

std::string describe(const BoundCheck& c) {
  return fmt("%s: %s p=%.4f [%.4f, %.4f] n=%llu censored=%llu", c.name.c_str(), std::string(to_string(c.verdict)).c_str(),
             c.estimate.p_hat, c.estimate.ci.lo, c.estimate.ci.hi, static_cast<unsigned long long>(c.estimate.n),
             static_cast<unsigned long long>(c.estimate.censored));
}

// 1 ----------------------------------------------------------------------------

Line oracle_equivalence(int jobs) {
  const Box box = Box::centered(1);
  struct Pair {
    std::string label;
    ProcessSpec spec;
    Site site;
    double T;
  };
  const std::vector<Pair> pairs{
      {"center, all plus, T=1", {box, Boundary::FixedMinus, InitSpec{1.0, {}}, {}}, kOrigin, 1.0},
      {"corner (1,1), all plus, T=0.5", {box, Boundary::FixedMinus, InitSpec{1.0, {}}, {}}, Site{1, 1}, 0.5},
      {"(1,0) with frozen origin, density 1/2, T=1",
       {box, Boundary::FixedMinus, InitSpec{}, FreezeSchedule::origin_plus()}, Site{1, 0}, 1.0},
  };
  Line out{true, ""};
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const json q{{"spec", to_json(p.spec)}, {"target", {{"site", to_json(p.site)}, {"value", -1}}}, {"horizon", p.T}};
    const auto ans = run_oracle_query(q);
    const double exact = ans.at("probability").get<double>();
    const auto est = monte_carlo_hitting(p.spec, p.site, Spin::Minus, p.T, 100000, derive_seed(7001, k), jobs);
    const auto c = oracle_crosscheck(est, spec_hash(p.spec), exact, spec_hash(spec_from_json(q.at("spec"))));
    out.pass = out.pass && c.verdict == Verdict::Pass;
    out.detail += fmt("%s%s: exact %.6f, MC %.6f [%.6f, %.6f]", k ? "; " : "", p.label.c_str(), exact, est.p_hat,
                      est.ci.lo, est.ci.hi);
  }
  return out;
}

// 2 and 3 -----------------------------------------------------------------------

std::pair<Line, Line> first_neighbor(int jobs, double& seconds) {
  const auto r = run_config(read_json(kConfigs / "first_neighbor_symmetry.json"), jobs);
  seconds = r.wall_seconds;
  const auto& uni = find_check(r, "uniform over 4 directions");
  const auto& cond = find_check(r, "contains 1/4");
  const auto& lit = find_check(r, ">= 1/4");
  const auto& counts = r.extra.at("counts");
  Line sharp{uni.verdict == Verdict::Pass && cond.verdict == Verdict::Pass && seconds < 600.0,
             fmt("box half-width %d; first-flip counts R/L/U/D = %llu/%llu/%llu/%llu; %s; %s; %.0fs (budget 600s)",
                 r.extra.at("half_width").get<int>(), counts.at("right").get<unsigned long long>(),
                 counts.at("left").get<unsigned long long>(), counts.at("up").get<unsigned long long>(),
                 counts.at("down").get<unsigned long long>(), (uni.note).c_str(), describe(cond).c_str(), seconds)};
  Line literal{lit.verdict != Verdict::Fail, describe(lit)};
  return {sharp, literal};
}

// 4 ------------------------------------------------------------------------------

Line domination(int jobs) {
  const auto r = run_config(read_json(kConfigs / "domination.json"), jobs);
  const auto& a = find_check(r, "origin-frozen run dominates the free run");
  const auto& b = find_check(r, "box-then-origin frozen run dominates");
  const auto events = r.extra.at("events").get<std::uint64_t>();
  return {a.verdict == Verdict::Pass && b.verdict == Verdict::Pass && events >= 1000000,
          fmt("%s; %s; %llu coupled events over %zu trials", a.note.c_str(), b.note.c_str(),
              static_cast<unsigned long long>(events), r.jsonl.size())};
}

// 5 and 6 ------------------------------------------------------------------------

std::pair<Line, Line> propagation(int jobs) {
  const auto r = run_config(read_json(kConfigs / "propagation.json"), jobs);
  Line cone{true, ""};
  for (const auto& c : r.checks) {
    if (c.name.find("Erlang") != std::string::npos) continue;
    cone.pass = cone.pass && c.verdict == Verdict::Pass;
  }
  const auto& mono = find_check(r, "nonincreasing");
  const auto& lc = find_check(r, "influence set");
  cone.detail = fmt("%s (%s); %s (%s); decay:", lc.name.c_str(), lc.note.c_str(), mono.name.c_str(),
                    std::string(to_string(mono.verdict)).c_str());
  for (const auto& row : r.tables.front().second)
    if (row.front() != "outer_half_width") cone.detail += " L'=" + row[0] + " p=" + row[3] + " lo=" + row[4] + " bound=" + row[6];

  const auto& grid = find_check(r, "Erlang");
  const auto spot = erlang_tail_check(3, 1.0, 2.0);
  // Closed forms: 1 - e^{-1}(1 + 1 + 1/2) and e^2 / 27.
  const double exact = 1.0 - std::exp(-1.0) * 2.5, bound = std::exp(2.0) / 27.0;
  const bool spot_ok = std::abs(spot.exact - exact) < 1e-12 && std::abs(spot.bound - bound) < 1e-12 &&
                       std::abs(spot.exact - 0.08030) < 5e-6 && std::abs(spot.bound - 0.27367) < 5e-6 &&
                       spot.exact <= spot.bound;
  Line erlang{grid.verdict == Verdict::Pass && spot_ok,
              fmt("grid: %s; m=3 T=1 alpha=2: exact %.6f <= bound %.6f", grid.note.c_str(), spot.exact, spot.bound)};
  return {cone, erlang};
}

// 7 ------------------------------------------------------------------------------

Line race(int jobs) {
  auto j = read_json(kConfigs / "race_symmetry.json");
  j["params"]["sites"] = json::array({json::array({2, 0}), json::array({1, 1})});
  const auto r = run_config(j, jobs);
  Line out{true, ""};
  for (const auto& c : r.checks) {
    out.pass = out.pass && c.verdict == Verdict::Pass;
    out.detail += (out.detail.empty() ? "" : "; ") + describe(c);
  }
  return out;
}

// 8 ------------------------------------------------------------------------------

Line flip_growth(int jobs) {
  const auto r = run_config(read_json(kConfigs / "flip_growth.json"), jobs);
  const auto& med = find_check(r, "median flip count");
  const auto& origin = find_check(r, "frozen origin never flips");
  bool windows_ok = true;
  std::string wdetail;
  for (const auto& c : r.checks)
    if (c.name.find(">= 1/8") != std::string::npos) {
      windows_ok = windows_ok && c.verdict != Verdict::Fail;
      wdetail += "; " + describe(c);
    }
  return {med.verdict == Verdict::Pass && origin.verdict == Verdict::Pass && windows_ok,
          med.note + "; origin: " + origin.note + wdetail};
}

// 9 ------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Line determinism() {
  const auto root = fs::temp_directory_path() / "coarsen_acceptance_determinism";
  fs::remove_all(root);
  Line out{true, ""};
  for (const auto& e : registry()) {
    auto j = read_json(kConfigs / (e.name + ".json"));
    j["trials"] = 40;
    if (e.name == "propagation") j["params"]["lightcone_pairs"] = 40;
    std::vector<std::string> files;
    for (int jobs : {1, 2, 4, 1}) {
      const auto dir = root / e.name / std::to_string(files.size());
      write_outputs(run_config(j, jobs), dir);
      files.push_back(slurp(dir / "trials.jsonl"));
    }
    const bool same = std::all_of(files.begin(), files.end(), [&](const std::string& f) { return f == files[0]; });
    out.pass = out.pass && same && !files[0].empty();
    out.detail += fmt("%s%s %s (%zu bytes)", out.detail.empty() ? "" : "; ", e.name.c_str(), same ? "identical" : "DIFFERENT",
                      files[0].size());
  }
  out.detail += "; jobs 1, 2, 4 and a rerun";
  return out;
}

// 10 -----------------------------------------------------------------------------

Line engine_distribution() {
  const Box box(Site{0, 0}, Site{99, 99});
  const std::size_t n = box.size();
  const double count_T = 10.0, horizon = 60.0;
  const std::uint32_t gaps_per_site = 10;
  RingStream rings(n, 20240110, horizon);
  std::vector<std::uint32_t> counts(n, 0), seen(n, 0);
  std::vector<double> last(n, 0.0), gaps;
  gaps.reserve(n * gaps_per_site);
  RingEvent ev;
  while (rings.next(ev)) {
    if (ev.time <= count_T) ++counts[ev.site];
    // The first gaps_per_site gaps of each clock, all completed before the horizon.
    if (seen[ev.site] > 0 && seen[ev.site] <= gaps_per_site) gaps.push_back(ev.time - last[ev.site]);
    ++seen[ev.site];
    last[ev.site] = ev.time;
  }
  const bool enough = std::all_of(seen.begin(), seen.end(), [&](auto s) { return s > gaps_per_site; });

  // Poisson bins lo..hi; the two end bins absorb the tails so each expects at least 5.
  const boost::math::poisson_distribution<double> pois(count_T);
  const double N = static_cast<double>(n);
  std::uint32_t lo = 0;
  while (boost::math::cdf(pois, lo) * N < 5.0) ++lo;
  std::uint32_t hi = lo + 1;
  while (boost::math::cdf(boost::math::complement(pois, hi)) * N >= 5.0) ++hi;
  std::vector<double> obs(hi - lo + 1, 0.0), expected(hi - lo + 1);
  for (std::uint32_t k = lo; k <= hi; ++k) {
    double mass = boost::math::pdf(pois, k);
    if (k == lo) mass = boost::math::cdf(pois, lo);
    if (k == hi) mass = boost::math::cdf(boost::math::complement(pois, hi - 1));
    expected[k - lo] = mass * N;
  }
  for (auto c : counts) obs[std::clamp(c, lo, hi) - lo] += 1.0;
  const auto chi = chi_square_gof(obs, expected, static_cast<int>(obs.size()) - 1);
  const auto ks = ks_test(gaps, [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); });
  return {enough && gaps.size() >= 98000 && chi.p_value >= 0.01 && ks.p_value >= 0.01,
          fmt("ring counts on %zu sites by T=%.0f: chi-square %.2f, %d dof, p=%.4f; %zu per-site gaps: KS D=%.5f, p=%.4f",
              n, count_T, chi.statistic, chi.dof, chi.p_value, gaps.size(), ks.statistic, ks.p_value)};
}

}  // namespace

int main() {
  const int jobs = available_threads();
  double fn_seconds = 0.0;
  std::pair<Line, Line> fn, prop;

  const auto timed = [](const std::string& name, const std::function<Line()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Line l;
    try {
      l = f();
    } catch (const std::exception& e) {
      l = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s | %s | %.1fs\n", l.pass ? "PASS" : "FAIL", name.c_str(), l.detail.c_str(), s);
    std::fflush(stdout);
    return l.pass;
  };

  bool ok = true;
  ok &= timed("1 oracle equivalence", [&] { return oracle_equivalence(jobs); });
  ok &= timed("2 first-neighbor symmetry", [&] {
    fn = first_neighbor(jobs, fn_seconds);
    return fn.first;
  });
  ok &= timed("3 first-neighbor literal bound", [&] { return fn.second; });
  ok &= timed("4 monotone coupling", [&] { return domination(jobs); });
  ok &= timed("5 light cone and decay", [&] {
    prop = propagation(jobs);
    return prop.first;
  });
  ok &= timed("6 Erlang tail bound", [&] { return prop.second; });
  ok &= timed("7 race symmetry", [&] { return race(jobs); });
  ok &= timed("8 flip growth", [&] { return flip_growth(jobs); });
  ok &= timed("9 determinism", [&] { return determinism(); });
  ok &= timed("10 engine distribution", [&] { return engine_distribution(); });
  return ok ? 0 : 1;
}
