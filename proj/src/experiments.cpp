#include "coarsen/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "coarsen/engine.hpp"
#include "coarsen/margin.hpp"
#include "coarsen/observables.hpp"
#include "coarsen/oracle.hpp"
#include "coarsen/randomness.hpp"
#include "coarsen/trials.hpp"

namespace coarsen {

// ---------------------------------------------------------------------------
// Configuration

int ExperimentConfig::resolve_half_width(double sizing_horizon, int min_inner) const {
  if (!auto_size) return half_width;
  return compute_safe_margin(sizing_horizon, eps, std::max(inner_half_width, min_inner));
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  raw["seed"] = s;
}

void ExperimentConfig::set_trials(std::size_t n) {
  if (n < 1) throw std::invalid_argument("trials must be >= 1");
  trials = n;
  raw["trials"] = n;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  c.experiment = j.at("experiment").get<std::string>();
  find_experiment(c.experiment);

  const json box = j.value("box", json::object());
  const json hw = box.value("half_width", json("auto"));
  if (hw.is_string()) {
    if (hw.get<std::string>() != "auto") throw std::invalid_argument("box.half_width must be an integer or \"auto\"");
    c.auto_size = true;
    if (!box.contains("eps") || !box.contains("inner_half_width"))
      throw std::invalid_argument("auto-sized box needs box.eps and box.inner_half_width");
    c.eps = box.at("eps").get<double>();
    c.inner_half_width = box.at("inner_half_width").get<int>();
    if (!(c.eps > 0.0 && c.eps < 1.0)) throw std::invalid_argument("box.eps must be in (0, 1)");
    if (c.inner_half_width < 0) throw std::invalid_argument("box.inner_half_width must be >= 0");
  } else {
    c.half_width = hw.get<int>();
    if (c.half_width < 1) throw std::invalid_argument("box.half_width must be >= 1");
  }

  c.boundary = boundary_from_string(j.value("boundary", std::string("periodic")));
  c.horizon = j.at("horizon").get<double>();
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw std::invalid_argument("horizon must be positive");
  const auto trials = j.at("trials").get<std::int64_t>();
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  c.trials = static_cast<std::size_t>(trials);
  c.seed = j.value("seed", std::uint64_t{1});
  c.params = j.value("params", json::object());
  if (!c.params.is_object()) throw std::invalid_argument("params must be an object");
  if (c.params.contains("windows")) {
    const auto w = c.params.at("windows").get<std::vector<double>>();
    for (std::size_t i = 1; i < w.size(); ++i)
      if (!(w[i] > w[i - 1])) throw std::invalid_argument("params.windows must be strictly increasing");
  }
  c.output_dir = j.value("output_dir", "out/" + c.experiment);

  c.raw = j;
  c.raw.erase("output_dir");
  c.raw.erase("jobs");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(json::parse(is));
}

bool ExperimentResult::any_fail() const {
  return std::any_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.verdict == Verdict::Fail; });
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

json record(const ExperimentConfig& cfg, std::size_t trial, std::uint64_t seed) {
  return {{"config_hash", hex64(cfg.hash())}, {"trial", trial}, {"seed", seed}, {"engine", kEngineVersion}};
}

ExperimentResult start(const ExperimentConfig& cfg) {
  ExperimentResult r;
  r.experiment = cfg.experiment;
  r.config_hash = cfg.hash();
  return r;
}

BoundCheck inconclusive(std::string name, double bound, BoundDirection dir, std::string note) {
  BoundCheck c;
  c.name = std::move(name);
  c.bound = bound;
  c.direction = dir;
  c.verdict = Verdict::Inconclusive;
  c.note = std::move(note);
  return c;
}

std::size_t count_censored(std::span<const Outcome> o) {
  return static_cast<std::size_t>(std::count_if(o.begin(), o.end(), [](const Outcome& x) { return x.censored(); }));
}

/// Interval contains `value` among resolved trials, or INCONCLUSIVE when none resolved.
BoundCheck contains_check(std::span<const Outcome> outcomes, double value, std::string name) {
  if (count_censored(outcomes) == outcomes.size())
    return inconclusive(std::move(name), value, BoundDirection::AtLeast, "every trial censored");
  auto c = check_contains(estimate(outcomes), value, std::move(name));
  c.note = std::to_string(c.estimate.censored) + " censored trials excluded";
  return c;
}

/// ">= bound" with censored trials counted as non-occurrences.
BoundCheck conservative_check(std::span<const Outcome> outcomes, double bound, std::string name) {
  if (count_censored(outcomes) == outcomes.size())
    return inconclusive(std::move(name), bound, BoundDirection::AtLeast, "every trial censored");
  auto c = check_bound(estimate_conservative(outcomes), bound, BoundDirection::AtLeast, std::move(name));
  c.note = std::to_string(c.estimate.censored) + " censored trials counted as non-occurrences";
  return c;
}

BoundCheck exact_zero(std::string name, std::uint64_t violations, std::uint64_t checked) {
  BoundCheck c;
  c.name = std::move(name);
  c.bound = 0.0;
  c.direction = BoundDirection::AtMost;
  c.estimate = estimate_counts(std::min(violations, checked), checked, 0);
  c.verdict = violations == 0 ? Verdict::Pass : Verdict::Fail;
  c.note = std::to_string(violations) + " violations";
  return c;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Wraps a ring source and captures the process configuration at fixed times.
template <class Source>
class SnapshotSource {
 public:
  SnapshotSource(Source& source, const Process& process, std::vector<double> times, std::string prefix,
                 std::vector<Frame>& out)
      : source_(source), process_(process), times_(std::move(times)), prefix_(std::move(prefix)), out_(out) {
    while (next_ < times_.size() && times_[next_] <= 0.0) capture();
  }

  bool next(RingEvent& ev) {
    if (!source_.next(ev)) return false;
    while (next_ < times_.size() && ev.time > times_[next_]) capture();
    return true;
  }

  /// Remaining times up to the horizon see the final state.
  void finish(double horizon) {
    while (next_ < times_.size() && times_[next_] <= horizon) capture();
  }

 private:
  void capture() {
    std::ostringstream name;
    name << prefix_ << "_t" << std::setw(8) << std::setfill('0') << std::fixed << std::setprecision(2)
         << times_[next_];
    out_.push_back({name.str(), process_.config()});
    ++next_;
  }

  Source& source_;
  const Process& process_;
  std::vector<double> times_;
  std::size_t next_ = 0;
  std::string prefix_;
  std::vector<Frame>& out_;
};

std::vector<double> snapshot_times(const ExperimentConfig& cfg) {
  auto t = cfg.params.value("snapshot_times", std::vector<double>{});
  std::sort(t.begin(), t.end());
  for (double x : t)
    if (x < 0.0 || x > cfg.horizon) throw std::invalid_argument("snapshot times must lie in [0, horizon]");
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// First-neighbor symmetry

ExperimentResult exp_first_neighbor_symmetry(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (cfg.params.contains("freeze"))
    throw std::invalid_argument("first_neighbor_symmetry runs the unfrozen process; remove params.freeze");
  const int forced = cfg.params.value("forced_half_width", 2);
  if (forced < 1) throw std::invalid_argument("forced_half_width must be >= 1");
  const int hw = cfg.resolve_half_width(cfg.horizon, forced);
  if (hw <= forced) throw std::invalid_argument("box must be larger than the forced region");

  const ProcessSpec spec{Box::centered(hw), cfg.boundary, forced_plus_box(forced), {}};
  spec.validate();
  const Lattice lattice(spec.box, spec.boundary);

  struct Trial {
    Outcome outcome;
    std::uint64_t events = 0;
  };
  const auto trials = run_trials(cfg.trials, cfg.seed, opt.jobs, [&](std::size_t, std::uint64_t seed) {
    Process p(spec, lattice, initial_config(spec, seed));
    RingStream rings(lattice.size(), seed, cfg.horizon);
    Detector d(FirstNeighborMinus{0.0, Direction::Right}, spec.box);
    d.begin(p.config());
    const auto n = drive(p, rings, d);
    return Trial{d.finish(cfg.horizon), n};
  });

  auto r = start(cfg);
  std::vector<Outcome> outcomes;
  std::array<std::uint64_t, 4> counts{};
  std::uint64_t ties = 0, events = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    outcomes.push_back(t.outcome);
    events += t.events;
    if (t.outcome.first)
      ++counts[static_cast<std::size_t>(*t.outcome.first)];
    else if (!t.outcome.censored())
      ++ties;
    auto line = record(cfg, i, derive_seed(cfg.seed, i));
    line["first_neighbor_minus"] = to_json(t.outcome);
    line["events"] = t.events;
    r.jsonl.push_back(line.dump());
  }

  const std::uint64_t total = counts[0] + counts[1] + counts[2] + counts[3];
  const std::string uni = "first flipping neighbor uniform over 4 directions (chi-square, alpha=0.01)";
  if (total >= 40) {
    const auto chi = uniformity_test(counts);
    BoundCheck c;
    c.name = uni;
    c.bound = 0.01;
    c.direction = BoundDirection::AtLeast;
    c.estimate = estimate_counts(counts[0], total, trials.size() - total);
    c.verdict = chi.p_value >= 0.01 ? Verdict::Pass : Verdict::Fail;
    c.note = "statistic=" + num(chi.statistic) + " p_value=" + num(chi.p_value);
    r.checks.push_back(c);
  } else {
    r.checks.push_back(inconclusive(uni, 0.01, BoundDirection::AtLeast, "fewer than 40 strict first flips"));
  }

  std::vector<Outcome> strict;
  for (const auto& o : outcomes)
    if (o.first || o.censored()) strict.push_back(o);
  r.checks.push_back(contains_check(strict, 0.25, "P(right neighbor first | some neighbor resolves) contains 1/4"));
  r.checks.push_back(conservative_check(outcomes, 0.25, "P(right neighbor first) >= 1/4"));

  r.extra = {{"half_width", hw},
             {"counts", {{"right", counts[0]}, {"left", counts[1]}, {"up", counts[2]}, {"down", counts[3]}}},
             {"simultaneous", ties},
             {"censored", count_censored(outcomes)},
             {"events", events}};
  return r;
}

// ---------------------------------------------------------------------------
// Finite propagation

namespace {

/// Tracks the set of sites the two coupled runs may disagree on. A ring at x
/// brings x into the set when some neighbor is already in it.
class LightCone {
 public:
  LightCone(const Lattice& lattice, const Box& inner, const SpinConfig& a, const SpinConfig& b)
      : lattice_(lattice), inner_(inner), influenced_(lattice.size(), 0) {
    for (std::uint32_t i = 0; i < a.size(); ++i) influenced_[i] = a[i] != b[i];
  }

  void on_coupled_step(std::uint64_t, const RingEvent& ev, std::span<const Step> steps, std::span<const Process>) {
    const std::uint32_t x = ev.site;
    const auto n = static_cast<std::uint32_t>(lattice_.size());
    if (!influenced_[x])
      for (auto s : lattice_.slots(x))
        if (s < n && influenced_[s]) {
          influenced_[x] = 1;
          break;
        }
    const bool inside = inner_.contains(lattice_.box().site(x));
    const bool differ = steps[0].after != steps[1].after;
    if (differ && !influenced_[x]) ++violations;
    if (influenced_[x] && inside) chain_reached = true;
    if (differ && inside) inner_discrepancy = true;
  }
  bool done() const { return false; }

  std::uint64_t violations = 0;
  bool chain_reached = false;
  bool inner_discrepancy = false;

 private:
  const Lattice& lattice_;
  Box inner_;
  std::vector<std::uint8_t> influenced_;
};

}  // namespace

ExperimentResult exp_propagation(const ExperimentConfig& cfg, const RunOptions& opt) {
  const int inner = cfg.params.value("inner_half_width", 1);
  const double horizon = cfg.params.value("T", cfg.horizon);
  auto ladder = cfg.params.value("ladder", std::vector<int>{3, 5, 8, 12});
  const auto pairs = cfg.params.value("lightcone_pairs", std::size_t{1000});
  if (ladder.empty()) throw std::invalid_argument("params.ladder must not be empty");
  if (!(horizon > 0.0 && horizon <= cfg.horizon)) throw std::invalid_argument("params.T must be in (0, horizon]");
  std::sort(ladder.begin(), ladder.end());
  for (int l : ladder)
    if (l <= inner) throw std::invalid_argument("every ladder entry must exceed the inner half-width");
  const int top = ladder.back();
  const int hw = cfg.resolve_half_width(horizon, top);
  if (hw <= top) throw std::invalid_argument("box must be larger than the largest ladder entry");

  const Box box = Box::centered(hw);
  const Lattice lattice(box, cfg.boundary);
  std::vector<ProcessSpec> specs;
  for (int l : ladder) {
    specs.push_back({box, cfg.boundary, forced_plus_box(l), {}});
    specs.back().validate();
  }

  // Common random numbers across the ladder: forcing a larger box only adds
  // +1 spins, so by monotonicity failures at L'+ imply failures at L'.
  struct Trial {
    std::vector<Outcome> outcomes;
  };
  const auto trials = run_trials(cfg.trials, cfg.seed, opt.jobs, [&](std::size_t, std::uint64_t seed) {
    Trial t;
    for (const auto& spec : specs) {
      Process p(spec, lattice, initial_config(spec, seed));
      RingStream rings(lattice.size(), seed, horizon);
      Detector d(BoxStaysPlus{inner, horizon}, box);
      d.begin(p.config());
      drive(p, rings, d);
      t.outcomes.push_back(d.finish(horizon));
    }
    return t;
  });

  auto r = start(cfg);
  Table decay{{"outer_half_width", "failures", "trials", "p_hat", "lo", "hi", "analytic_bound"}};
  std::vector<Estimate> ests;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    std::uint64_t failures = 0;
    for (const auto& t : trials)
      if (t.outcomes[k].status == Status::NotOccurred) ++failures;
    const auto est = estimate_counts(failures, trials.size(), 0);
    const auto bound = boundary_influence_bound(horizon, inner, ladder[k]);
    ests.push_back(est);
    BoundCheck c;
    c.name = "L'=" + std::to_string(ladder[k]) + ": lower CI of P(inner box not all plus on [0,T]) <= analytic bound";
    c.bound = bound.value;
    c.direction = BoundDirection::AtMost;
    c.estimate = est;
    c.verdict = est.ci.lo <= bound.value ? Verdict::Pass : Verdict::Fail;
    c.note = "alpha=" + num(bound.alpha);
    r.checks.push_back(c);
    decay.push_back({std::to_string(ladder[k]), std::to_string(failures), std::to_string(trials.size()),
                     num(est.p_hat), num(est.ci.lo), num(est.ci.hi), num(bound.value)});
  }
  {
    bool monotone = true;
    for (std::size_t k = 1; k < ests.size(); ++k) monotone = monotone && ests[k].p_hat <= ests[k - 1].p_hat;
    BoundCheck c;
    c.name = "P(inner box not all plus on [0,T]) nonincreasing in L'";
    c.direction = BoundDirection::AtMost;
    c.estimate = ests.back();
    c.verdict = monotone ? Verdict::Pass : Verdict::Fail;
    r.checks.push_back(c);
  }
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto line = record(cfg, i, derive_seed(cfg.seed, i));
    line["kind"] = "box_stays_plus";
    json per = json::object();
    for (std::size_t k = 0; k < ladder.size(); ++k) per[std::to_string(ladder[k])] = to_json(trials[i].outcomes[k]);
    line["outcomes"] = per;
    r.jsonl.push_back(line.dump());
  }

  // Light cone: the second run redraws every spin outside {-L'..L'}^2.
  const Box inner_box = Box::centered(inner);
  std::uint64_t violations = 0, checked = 0;
  json cone = json::array();
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const auto& spec = specs[k];
    const Box outer = Box::centered(ladder[k]);
    struct Pair {
      std::uint64_t violations = 0;
      bool chain = false;
      bool inner_discrepancy = false;
      std::uint64_t events = 0;
    };
    const std::uint64_t base = derive_seed(cfg.seed, 0x1C00 + k);
    const auto res = run_trials(pairs, base, opt.jobs, [&](std::size_t, std::uint64_t seed) {
      const SpinConfig a = initial_config(spec, seed);
      SpinConfig b = a;
      Rng rng(derive_seed(seed, 1));
      for (std::uint32_t i = 0; i < b.size(); ++i) {
        const double u = uniform01(rng);
        if (!outer.contains(box.site(i))) b[i] = u < spec.init.density ? Spin::Plus : Spin::Minus;
      }
      std::vector<Process> ps{Process(spec, lattice, a), Process(spec, lattice, b)};
      RingStream rings(lattice.size(), seed, horizon);
      LightCone obs(lattice, inner_box, a, b);
      Pair out;
      out.events = drive_coupled(std::span<Process>(ps), rings, obs);
      out.violations = obs.violations;
      out.chain = obs.chain_reached;
      out.inner_discrepancy = obs.inner_discrepancy;
      return out;
    });
    std::uint64_t v = 0, chains = 0, inner_diff = 0, unexplained = 0;
    for (std::size_t i = 0; i < res.size(); ++i) {
      v += res[i].violations;
      chains += res[i].chain;
      inner_diff += res[i].inner_discrepancy;
      unexplained += res[i].inner_discrepancy && !res[i].chain;
      auto line = record(cfg, i, derive_seed(base, i));
      line["kind"] = "light_cone";
      line["outer_half_width"] = ladder[k];
      line["violations"] = res[i].violations;
      line["chain_reached_inner"] = res[i].chain;
      line["inner_discrepancy"] = res[i].inner_discrepancy;
      line["events"] = res[i].events;
      r.jsonl.push_back(line.dump());
    }
    violations += v + unexplained;
    checked += res.size();
    cone.push_back({{"outer_half_width", ladder[k]},
                    {"pairs", res.size()},
                    {"violations", v},
                    {"chain_reached_inner", chains},
                    {"inner_discrepancy", inner_diff},
                    {"inner_discrepancy_without_chain", unexplained}});
  }
  r.checks.push_back(exact_zero("coupled runs differing outside L' never disagree outside the influence set",
                                violations, checked));

  // Chernoff tail bound against exact Erlang tails.
  std::uint64_t erlang_bad = 0, erlang_n = 0;
  for (int m = 1; m <= 10; ++m)
    for (int ti = 1; ti <= 10; ++ti)
      for (int ai = 1; ai <= 10; ++ai) {
        const double t = 0.25 * ti;
        const double alpha = 0.5 * ai;
        const auto e = erlang_tail_check(m, t, alpha);
        ++erlang_n;
        if (e.exact > e.bound) ++erlang_bad;
      }
  r.checks.push_back(exact_zero("Erlang(m,1) < T probability <= e^{aT}/(1+a)^m on a 10x10x10 grid", erlang_bad,
                                erlang_n));

  r.tables.push_back({"decay", decay});
  const auto spot = erlang_tail_check(3, 1.0, 2.0);
  r.extra = {{"half_width", hw},
             {"inner_half_width", inner},
             {"T", horizon},
             {"light_cone", cone},
             {"erlang_spot", {{"m", 3}, {"T", 1.0}, {"alpha", 2.0}, {"exact", spot.exact}, {"bound", spot.bound}}}};
  return r;
}

// ---------------------------------------------------------------------------
// Monotone domination under the standard coupling

namespace {

/// Checks upper >= lower at the ringing site every step, and over the whole
/// configuration whenever a freeze onset may have changed sites elsewhere.
class DominationCheck {
 public:
  DominationCheck(std::size_t upper, std::size_t lower, std::span<const Process> ps)
      : upper_(upper), lower_(lower), seen_overwrites_(total_overwrites(ps)) {
    violations = domination_violations(ps[upper_].config(), ps[lower_].config());
  }

  void on_coupled_step(std::uint64_t, const RingEvent& ev, std::span<const Step> steps, std::span<const Process> ps) {
    const auto ow = total_overwrites(ps);
    if (ow != seen_overwrites_) {
      seen_overwrites_ = ow;
      violations += domination_violations(ps[upper_].config(), ps[lower_].config());
      ++full_checks;
    } else if (value(steps[upper_].after) < value(steps[lower_].after)) {
      ++violations;
    }
    (void)ev;
  }
  bool done() const { return false; }

  std::uint64_t violations = 0;
  std::uint64_t full_checks = 0;

 private:
  static std::size_t total_overwrites(std::span<const Process> ps) {
    std::size_t n = 0;
    for (const auto& p : ps) n += p.overwrites().size();
    return n;
  }
  std::size_t upper_, lower_;
  std::size_t seen_overwrites_;
};

/// Feeds the steps of one member of a coupled run to a set of detectors.
struct CoupledDetectors {
  DominationCheck check;
  std::size_t member;
  std::vector<Detector> detectors;

  void on_coupled_step(std::uint64_t i, const RingEvent& ev, std::span<const Step> steps, std::span<const Process> ps) {
    check.on_coupled_step(i, ev, steps, ps);
    const StepView v{i, ev, steps[member]};
    for (auto& d : detectors) d.on_step(v);
  }
  bool done() const { return false; }
};

}  // namespace

ExperimentResult exp_domination(const ExperimentConfig& cfg, const RunOptions& opt) {
  const int freeze_hw = cfg.params.value("freeze_half_width", 2);
  const double freeze_until = cfg.params.value("freeze_until", 5.0);
  auto starts = cfg.params.value("window_starts", std::vector<double>{0.0});
  if (freeze_hw < 1) throw std::invalid_argument("freeze_half_width must be >= 1");
  if (!(freeze_until >= 0.0)) throw std::invalid_argument("freeze_until must be >= 0");
  for (double s : starts)
    if (s < 0.0 || s >= cfg.horizon) throw std::invalid_argument("window starts must lie in [0, horizon)");
  const int hw = cfg.resolve_half_width(cfg.horizon, freeze_hw);
  if (hw <= freeze_hw) throw std::invalid_argument("box must be larger than the frozen box");

  const Box box = Box::centered(hw);
  const Lattice lattice(box, cfg.boundary);
  const ProcessSpec plain{box, cfg.boundary, InitSpec{}, {}};
  const ProcessSpec primed{box, cfg.boundary, InitSpec{}, FreezeSchedule::origin_plus()};
  const ProcessSpec tilde{box, cfg.boundary, forced_plus_box(freeze_hw),
                          FreezeSchedule::box_then_origin(freeze_hw, freeze_until)};
  for (const auto* s : {&plain, &primed, &tilde}) s->validate();

  struct Trial {
    std::uint64_t primed_over_plain = 0;
    std::uint64_t tilde_over_primed = 0;
    std::uint64_t events = 0;
    std::vector<Outcome> windows;
  };
  const auto trials = run_trials(cfg.trials, cfg.seed, opt.jobs, [&](std::size_t, std::uint64_t seed) {
    Trial t;
    {
      const SpinConfig init = initial_config(plain, seed);
      std::vector<Process> ps{Process(plain, lattice, init), Process(primed, lattice, init)};
      CoupledDetectors obs{DominationCheck(1, 0, ps), 1, {}};
      const SpinConfig start_primed = ps[1].config();
      for (double s : starts) {
        obs.detectors.emplace_back(NeighborMinus{s}, box);
        obs.detectors.back().begin(start_primed);
      }
      RingStream rings(lattice.size(), seed, cfg.horizon);
      t.events += drive_coupled(std::span<Process>(ps), rings, obs);
      t.primed_over_plain = obs.check.violations;
      for (auto& d : obs.detectors) t.windows.push_back(d.finish(cfg.horizon));
    }
    {
      // Same seed: the unforced sites of both initial states coincide.
      std::vector<Process> ps{Process(tilde, lattice, initial_config(tilde, seed)),
                              Process(primed, lattice, initial_config(primed, seed))};
      DominationCheck obs(0, 1, ps);
      RingStream rings(lattice.size(), seed, cfg.horizon);
      t.events += drive_coupled(std::span<Process>(ps), rings, obs);
      t.tilde_over_primed = obs.violations;
    }
    return t;
  });

  auto r = start(cfg);
  std::uint64_t v1 = 0, v2 = 0, events = 0;
  std::vector<std::vector<Outcome>> per_window(starts.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    v1 += t.primed_over_plain;
    v2 += t.tilde_over_primed;
    events += t.events;
    auto line = record(cfg, i, derive_seed(cfg.seed, i));
    line["violations_primed_over_plain"] = t.primed_over_plain;
    line["violations_boxfrozen_over_primed"] = t.tilde_over_primed;
    line["events"] = t.events;
    json w = json::array();
    for (std::size_t k = 0; k < starts.size(); ++k) {
      per_window[k].push_back(t.windows[k]);
      auto o = to_json(t.windows[k]);
      o["from"] = starts[k];
      w.push_back(o);
    }
    line["neighbor_minus"] = w;
    r.jsonl.push_back(line.dump());
  }
  r.checks.push_back(exact_zero("origin-frozen run dominates the free run pointwise", v1, trials.size()));
  r.checks.push_back(
      exact_zero("box-then-origin frozen run dominates the origin-frozen run pointwise", v2, trials.size()));
  for (std::size_t k = 0; k < starts.size(); ++k)
    r.checks.push_back(conservative_check(per_window[k], 0.25,
                                          "origin frozen: P((1,0) is -1 at some t in [" + num(starts[k]) +
                                              ", horizon]) >= 1/4"));
  r.extra = {{"half_width", hw}, {"events", events}};
  return r;
}

// ---------------------------------------------------------------------------
// Race symmetry

bool point_symmetric(const Box& box, const Region& region, Site a, Site b) {
  const Site sum = a + b;
  auto reflect = [&](Site s) { return sum - s; };
  if (reflect(box.lo()) != box.hi()) return false;
  for (auto s : region.sites())
    if (!region.contains(reflect(s))) return false;
  return true;
}

ExperimentResult exp_race_symmetry(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::vector<Site> targets;
  for (const auto& z : cfg.params.value("sites", json::array({json::array({2, 0}), json::array({1, 1})})))
    targets.push_back(site_from_json(z));
  const int forced = cfg.params.value("forced_half_width", 6);
  if (targets.empty()) throw std::invalid_argument("params.sites must not be empty");
  if (forced < 1) throw std::invalid_argument("forced_half_width must be >= 1");

  auto r = start(cfg);
  json per_site = json::array();
  for (std::size_t zi = 0; zi < targets.size(); ++zi) {
    const Site z = targets[zi];
    if (z == kOrigin) throw std::invalid_argument("race site must differ from the origin");
    const int reach = std::max(std::abs(z.x), std::abs(z.y));
    const int hw = cfg.resolve_half_width(cfg.horizon, forced + reach);
    const Box box = Box::symmetric_about(kOrigin, z, hw);
    const Box forced_box = Box::symmetric_about(kOrigin, z, forced);
    if (!box.contains(forced_box) || box == forced_box)
      throw std::invalid_argument("simulation box must strictly contain the forced box");
    if (!forced_box.contains(kOrigin) || !forced_box.contains(z))
      throw std::invalid_argument("forced box must contain the origin and the race site");
    const Region forced_region = Region::of(forced_box);
    if (!point_symmetric(box, forced_region, kOrigin, z))
      throw std::logic_error("race box is not point-symmetric about the midpoint");

    InitSpec init;
    init.forced.push_back(ForcedRegion::uniform(forced_region, Spin::Plus));
    const ProcessSpec spec{box, cfg.boundary, init, {}};
    spec.validate();
    const Lattice lattice(box, cfg.boundary);

    const std::uint64_t base = derive_seed(cfg.seed, 0x5A00 + zi);
    const auto outcomes = run_trials(cfg.trials, base, opt.jobs, [&](std::size_t, std::uint64_t seed) {
      Process p(spec, lattice, initial_config(spec, seed));
      RingStream rings(lattice.size(), seed, cfg.horizon);
      Detector d(Race{z}, box);
      d.begin(p.config());
      drive(p, rings, d);
      return d.finish(cfg.horizon);
    });
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      auto line = record(cfg, i, derive_seed(base, i));
      line["z"] = to_json(z);
      line["race"] = to_json(outcomes[i]);
      r.jsonl.push_back(line.dump());
    }
    const std::string label = "(" + std::to_string(z.x) + "," + std::to_string(z.y) + ")";
    r.checks.push_back(contains_check(outcomes, 0.5, "P(" + label + " reaches -1 before the origin) contains 1/2"));
    per_site.push_back({{"z", to_json(z)}, {"box", to_json(box)}, {"censored", count_censored(outcomes)}});
  }
  r.extra = {{"sites", per_site}};
  return r;
}

// ---------------------------------------------------------------------------
// Flip growth at the neighbor of a frozen origin

namespace {

struct FlipTimes {
  std::uint32_t watched;
  std::uint32_t origin;
  std::vector<double> times;
  std::uint64_t origin_flips = 0;
  std::vector<Detector> detectors;

  void on_step(const StepView& v) {
    if (v.step.flipped()) {
      if (v.event.site == watched) times.push_back(v.event.time);
      if (v.event.site == origin) ++origin_flips;
    }
    for (auto& d : detectors) d.on_step(v);
  }
  bool done() const { return false; }
};

}  // namespace

ExperimentResult exp_flip_growth(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto horizons = cfg.params.value("horizons", std::vector<double>{50.0, 100.0, 200.0});
  auto windows = cfg.params.value("windows", std::vector<double>{0.0, 50.0, 100.0, 150.0, 200.0});
  const auto late_from = cfg.params.value("late_from_window", std::size_t{1});
  if (horizons.empty() || windows.size() < 2) throw std::invalid_argument("need horizons and at least two windows");
  for (std::size_t i = 1; i < horizons.size(); ++i)
    if (!(horizons[i] > horizons[i - 1])) throw std::invalid_argument("params.horizons must be strictly increasing");
  if (horizons.back() > cfg.horizon || windows.back() > cfg.horizon)
    throw std::invalid_argument("horizons and windows must not exceed the run horizon");
  if (windows.front() < 0.0) throw std::invalid_argument("windows must be >= 0");
  const int hw = cfg.resolve_half_width(cfg.horizon, 1);
  const Box box = Box::centered(hw);
  const Lattice lattice(box, cfg.boundary);
  const ProcessSpec spec{box, cfg.boundary, InitSpec{}, FreezeSchedule::origin_plus()};
  spec.validate();
  const auto snaps = snapshot_times(cfg);

  struct Trial {
    std::vector<double> times;
    std::uint64_t origin_flips = 0;
    std::vector<Outcome> windows;
    std::vector<Frame> frames;
  };
  const auto trials = run_trials(cfg.trials, cfg.seed, opt.jobs, [&](std::size_t i, std::uint64_t seed) {
    Process p(spec, lattice, initial_config(spec, seed));
    FlipTimes obs{box.index({1, 0}), box.index(kOrigin), {}, 0, {}};
    const SpinConfig init = p.config();
    for (std::size_t k = 1; k < windows.size(); ++k) {
      obs.detectors.emplace_back(WindowMinus{windows[k - 1], windows[k]}, box);
      obs.detectors.back().begin(init);
    }
    RingStream rings(lattice.size(), seed, cfg.horizon);
    Trial t;
    if (i == 0 && !snaps.empty()) {
      SnapshotSource src(rings, p, snaps, "trial0", t.frames);
      drive(p, src, obs);
      src.finish(cfg.horizon);
    } else {
      drive(p, rings, obs);
    }
    t.times = std::move(obs.times);
    t.origin_flips = obs.origin_flips;
    for (auto& d : obs.detectors) t.windows.push_back(d.finish(cfg.horizon));
    return t;
  });

  auto r = start(cfg);
  std::vector<std::vector<double>> counts(horizons.size());
  std::vector<std::vector<Outcome>> per_window(windows.size() - 1);
  std::uint64_t origin_total = 0, final_window_flip = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    origin_total += t.origin_flips;
    auto line = record(cfg, i, derive_seed(cfg.seed, i));
    json flips = json::object();
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const auto c = std::upper_bound(t.times.begin(), t.times.end(), horizons[h]) - t.times.begin();
      counts[h].push_back(static_cast<double>(c));
      flips[num(horizons[h])] = c;
    }
    const double a = windows[windows.size() - 2], b = windows.back();
    if (std::any_of(t.times.begin(), t.times.end(), [&](double x) { return x > a && x <= b; })) ++final_window_flip;
    json w = json::array();
    for (std::size_t k = 0; k < per_window.size(); ++k) {
      per_window[k].push_back(t.windows[k]);
      auto o = to_json(t.windows[k]);
      o["from"] = windows[k];
      o["to"] = windows[k + 1];
      w.push_back(o);
    }
    line["flips_right_neighbor"] = flips;
    line["origin_flips"] = t.origin_flips;
    line["windows"] = w;
    r.jsonl.push_back(line.dump());
    for (const auto& f : t.frames) r.frames.push_back(f);
  }

  std::vector<double> medians;
  for (auto& c : counts) medians.push_back(median(c));
  bool increasing = true;
  for (std::size_t h = 1; h < medians.size(); ++h) increasing = increasing && medians[h] > medians[h - 1];
  {
    BoundCheck c;
    c.name = "median flip count of (1,0) strictly increasing along the horizon ladder";
    c.direction = BoundDirection::AtLeast;
    c.verdict = increasing ? Verdict::Pass : Verdict::Fail;
    std::string note = "medians:";
    for (double m : medians) note += " " + num(m);
    c.note = note;
    r.checks.push_back(c);
  }
  r.checks.push_back(exact_zero("frozen origin never flips", origin_total, trials.size()));
  for (std::size_t k = std::min(late_from, per_window.size()); k < per_window.size(); ++k)
    r.checks.push_back(conservative_check(
        per_window[k], 0.125, "P((1,0) is -1 at some t in [" + num(windows[k]) + ", " + num(windows[k + 1]) + "]) >= 1/8"));

  Table table{{"horizon", "median_flips", "mean_flips"}};
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    const double mean = std::accumulate(counts[h].begin(), counts[h].end(), 0.0) / static_cast<double>(trials.size());
    table.push_back({num(horizons[h]), num(medians[h]), num(mean)});
  }
  r.tables.push_back({"flip_growth", table});
  r.extra = {{"half_width", hw},
             {"medians", medians},
             {"final_window_flip_fraction", static_cast<double>(final_window_flip) / static_cast<double>(trials.size())}};
  return r;
}

// ---------------------------------------------------------------------------
// Multi-site frozen sets (data only)

namespace {

struct SiteFlips {
  double late_start;
  std::vector<std::uint32_t> flips;
  std::vector<std::uint8_t> late;

  void on_step(const StepView& v) {
    if (!v.step.flipped()) return;
    ++flips[v.event.site];
    if (v.event.time >= late_start) late[v.event.site] = 1;
  }
  bool done() const { return false; }
};

}  // namespace

ExperimentResult exp_frozen_sets(const ExperimentConfig& cfg, const RunOptions& opt) {
  const int observe = cfg.params.value("observe_half_width", 3);
  const double late_start = cfg.params.value("late_start", cfg.horizon / 2);
  std::vector<FreezeEntry> entries;
  if (cfg.params.contains("frozen")) {
    for (const auto& f : cfg.params.at("frozen"))
      entries.push_back({Region::single(site_from_json(f.at("site"))), spin_from_int(f.value("value", 1)), 0.0,
                         kForever});
  } else {
    const int c = cfg.params.value("corners_of", 3);
    for (Site s : {Site{-c, -c}, Site{-c, c}, Site{c, -c}, Site{c, c}})
      entries.push_back({Region::single(s), Spin::Plus, 0.0, kForever});
  }
  if (entries.empty()) throw std::invalid_argument("frozen set must not be empty");
  if (observe < 0) throw std::invalid_argument("observe_half_width must be >= 0");
  if (late_start < 0.0 || late_start > cfg.horizon) throw std::invalid_argument("late_start must lie in [0, horizon]");

  int reach = observe;
  for (const auto& e : entries)
    for (auto s : e.region.sites()) reach = std::max({reach, std::abs(s.x), std::abs(s.y)});
  const int hw = cfg.resolve_half_width(cfg.horizon, reach);
  const Box box = Box::centered(hw);
  const Box inner = Box::centered(observe);
  if (!box.contains(inner)) throw std::invalid_argument("box must contain the observation box");
  const Lattice lattice(box, cfg.boundary);
  const ProcessSpec spec{box, cfg.boundary, InitSpec{}, FreezeSchedule(entries)};
  spec.validate();
  const auto snaps = snapshot_times(cfg);
  const bool watch_right = box.contains(Site{1, 0});

  auto r = start(cfg);
  const std::size_t n = lattice.size();
  std::vector<std::uint64_t> flip_sum(n, 0), late_sum(n, 0);
  constexpr std::size_t kChunk = 64;

  struct Trial {
    SiteFlips obs;
    std::vector<Frame> frames;
  };
  for (std::size_t begin = 0; begin < cfg.trials; begin += kChunk) {
    const std::size_t count = std::min(kChunk, cfg.trials - begin);
    // Seeds stay derive_seed(base, trial index) regardless of chunking.
    auto chunk = run_trials(count, 0, opt.jobs, [&](std::size_t j, std::uint64_t) {
      const std::size_t i = begin + j;
      const std::uint64_t seed = derive_seed(cfg.seed, i);
      Process p(spec, lattice, initial_config(spec, seed));
      Trial t{SiteFlips{late_start, std::vector<std::uint32_t>(n, 0), std::vector<std::uint8_t>(n, 0)}, {}};
      RingStream rings(n, seed, cfg.horizon);
      if (i == 0 && !snaps.empty()) {
        SnapshotSource src(rings, p, snaps, "trial0", t.frames);
        drive(p, src, t.obs);
        src.finish(cfg.horizon);
      } else {
        drive(p, rings, t.obs);
      }
      return t;
    });
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      const std::size_t i = begin + j;
      const auto& t = chunk[j];
      std::uint64_t in_f = 0, out_f = 0, in_l = 0, out_l = 0;
      for (std::uint32_t s = 0; s < n; ++s) {
        flip_sum[s] += t.obs.flips[s];
        late_sum[s] += t.obs.late[s];
        if (inner.contains(box.site(s))) {
          in_f += t.obs.flips[s];
          in_l += t.obs.late[s];
        } else {
          out_f += t.obs.flips[s];
          out_l += t.obs.late[s];
        }
      }
      auto line = record(cfg, i, derive_seed(cfg.seed, i));
      if (watch_right) line["flips_right_neighbor"] = t.obs.flips[box.index({1, 0})];
      line["flips_inside"] = in_f;
      line["flips_outside"] = out_f;
      line["late_flipping_sites_inside"] = in_l;
      line["late_flipping_sites_outside"] = out_l;
      r.jsonl.push_back(line.dump());
      for (const auto& f : t.frames) r.frames.push_back(f);
    }
  }

  const double trials = static_cast<double>(cfg.trials);
  Table sites{{"x", "y", "frozen", "inside", "mean_flips", "late_flip_fraction"}};
  std::vector<double> mean(n), late(n);
  double in_mean = 0, out_mean = 0, in_late = 0, out_late = 0;
  std::size_t in_n = 0, out_n = 0;
  for (std::uint32_t s = 0; s < n; ++s) {
    const Site site = box.site(s);
    mean[s] = static_cast<double>(flip_sum[s]) / trials;
    late[s] = static_cast<double>(late_sum[s]) / trials;
    const auto fv = spec.freeze.frozen_value(site, 0.0);
    const bool inside = inner.contains(site);
    if (inside) {
      in_mean += mean[s];
      in_late += late[s];
      ++in_n;
    } else {
      out_mean += mean[s];
      out_late += late[s];
      ++out_n;
    }
    sites.push_back({std::to_string(site.x), std::to_string(site.y), fv ? std::to_string(value(*fv)) : "0",
                     inside ? "1" : "0", num(mean[s]), num(late[s])});
  }
  r.tables.push_back({"sites", sites});
  r.heatmaps.push_back({"mean_flips", box, mean});
  r.heatmaps.push_back({"late_flip_fraction", box, late});
  json frozen = json::array();
  for (const auto& e : entries) frozen.push_back({{"site", to_json(e.region.sites()[0])}, {"value", value(e.value)}});
  r.extra = {{"half_width", hw},
             {"frozen", frozen},
             {"late_start", late_start},
             {"inside", {{"sites", in_n}, {"mean_flips", in_n ? in_mean / in_n : 0.0},
                         {"late_flip_fraction", in_n ? in_late / in_n : 0.0}}},
             {"outside", {{"sites", out_n}, {"mean_flips", out_n ? out_mean / out_n : 0.0},
                          {"late_flip_fraction", out_n ? out_late / out_n : 0.0}}}};
  return r;
}

// ---------------------------------------------------------------------------
// Registry

const std::vector<std::string>& known_claims() {
  static const std::vector<std::string> claims{
      "first-neighbor quarter bound", "finite propagation", "monotone domination", "conditional quarter bound",
      "window eighth bound",          "race symmetry",      "flip recurrence",     "multi-site freezing"};
  return claims;
}

const std::vector<ExperimentInfo>& registry() {
  static const std::vector<ExperimentInfo> reg{
      {"first_neighbor_symmetry",
       "which neighbor of the origin turns -1 first, started from an all-plus box",
       {"first-neighbor quarter bound"},
       {"first_neighbor_minus"},
       &exp_first_neighbor_symmetry},
      {"propagation",
       "all-plus box survival against the margin, light cone of the shared ring record, Erlang tail bound",
       {"finite propagation"},
       {"box_stays_plus"},
       &exp_propagation},
      {"domination",
       "pointwise order of coupled runs with nested freezing; neighbor of a frozen origin reaches -1",
       {"monotone domination", "conditional quarter bound"},
       {"neighbor_minus"},
       &exp_domination},
      {"race_symmetry",
       "site z against the origin in a point-symmetric all-plus box",
       {"race symmetry"},
       {"race"},
       &exp_race_symmetry},
      {"flip_growth",
       "flips of the neighbor of a frozen origin over growing horizons and windows",
       {"flip recurrence", "window eighth bound"},
       {"flip_count", "window_minus"},
       &exp_flip_growth},
      {"frozen_sets",
       "per-site flip statistics for user-chosen frozen sets; data only",
       {"multi-site freezing"},
       {"flip_count"},
       &exp_frozen_sets},
  };
  return reg;
}

const ExperimentInfo& find_experiment(const std::string& name) {
  for (const auto& e : registry())
    if (e.name == name) return e;
  throw std::invalid_argument("unknown experiment: " + name);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = find_experiment(cfg.experiment).run(cfg, opt);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace {

void write_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  for (const auto& row : table) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      const bool quote = row[k].find_first_of(",\"") != std::string::npos;
      if (k) os << ',';
      if (quote) {
        os << '"';
        for (char ch : row[k]) os << (ch == '"' ? "\"\"" : std::string(1, ch));
        os << '"';
      } else {
        os << row[k];
      }
    }
    os << '\n';
  }
}

}  // namespace

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "trials.jsonl");
    if (!os) throw std::runtime_error("cannot write " + (dir / "trials.jsonl").string());
    for (const auto& line : result.jsonl) os << line << '\n';
  }
  Table summary{{"check", "verdict", "direction", "bound", "p_hat", "lo", "hi", "successes", "n", "censored", "note"}};
  for (const auto& c : result.checks)
    summary.push_back({c.name, std::string(to_string(c.verdict)), c.direction == BoundDirection::AtLeast ? ">=" : "<=",
                       num(c.bound), num(c.estimate.p_hat), num(c.estimate.ci.lo), num(c.estimate.ci.hi),
                       std::to_string(c.estimate.successes), std::to_string(c.estimate.n),
                       std::to_string(c.estimate.censored), c.note});
  write_csv(dir / "summary.csv", summary);
  for (const auto& [name, table] : result.tables) write_csv(dir / (name + ".csv"), table);

  json checks = json::array();
  for (const auto& c : result.checks) checks.push_back(to_json(c));
  const json verdicts{{"experiment", result.experiment},
                      {"config_hash", hex64(result.config_hash)},
                      {"engine", kEngineVersion},
                      {"wall_seconds", result.wall_seconds},
                      {"any_fail", result.any_fail()},
                      {"checks", checks},
                      {"extra", result.extra}};
  std::ofstream(dir / "verdicts.json") << verdicts.dump(2) << '\n';

  if (!result.frames.empty() || !result.heatmaps.empty()) std::filesystem::create_directories(dir / "frames");
  for (const auto& f : result.frames) write_pgm(dir / "frames" / (f.name + ".pgm"), f.config);
  for (const auto& h : result.heatmaps) write_pgm_heatmap(dir / "frames" / (h.name + ".pgm"), h.box, h.values);
}

// ---------------------------------------------------------------------------
// Oracle queries and matching Monte Carlo

Estimate monte_carlo_hitting(const ProcessSpec& spec, Site site, Spin target, double horizon, std::size_t trials,
                             std::uint64_t seed, int jobs) {
  spec.validate();
  if (!spec.box.contains(site)) throw std::invalid_argument("target site outside the box");
  const Lattice lattice(spec.box, spec.boundary);
  const auto outcomes = run_trials(trials, seed, jobs, [&](std::size_t, std::uint64_t s) {
    Process p(spec, lattice, initial_config(spec, s));
    RingStream rings(lattice.size(), s, horizon);
    Detector d(FirstPassage{site, target}, spec.box);
    d.begin(p.config());
    drive(p, rings, d);
    return d.finish(horizon);
  });
  return estimate_conservative(outcomes);
}

json run_oracle_query(const json& query) {
  const ProcessSpec spec = spec_from_json(query.at("spec"));
  const auto& target = query.at("target");
  const Site site = site_from_json(target.at("site"));
  const Spin want = spin_from_int(target.value("value", -1));
  const double horizon = query.at("horizon").get<double>();
  if (!spec.box.contains(site)) throw std::invalid_argument("target site outside the box");
  if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");

  const std::uint32_t bit = spec.box.index(site);
  const std::size_t states = std::size_t{1} << spec.box.size();
  std::vector<bool> mask(states);
  for (StateIndex u = 0; u < states; ++u) mask[u] = (((u >> bit) & 1U) != 0) == (want == Spin::Plus);
  const auto res = transient_piecewise(spec, initial_law(spec), horizon, &mask);
  double p = 0.0;
  for (std::size_t u = 0; u < states; ++u)
    if (mask[u]) p += res.distribution[u];

  std::ostringstream event;
  event << "site (" << site.x << "," << site.y << ") takes value " << value(want) << " at some t in [0, " << horizon
        << "]";
  return {{"state_space_hash", hex64(spec_hash(spec))},
          {"states", states},
          {"event", event.str()},
          {"probability", p},
          {"error_bound", res.truncation_error + 1e-12}};
}

}  // namespace coarsen
