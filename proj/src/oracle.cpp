#include "coarsen/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coarsen {

StateIndex encode(const SpinConfig& config) {
  if (config.size() > kMaxOracleSites) throw std::invalid_argument("configuration too large for the exact oracle");
  StateIndex s = 0;
  for (std::uint32_t i = 0; i < config.size(); ++i)
    if (config[i] == Spin::Plus) s |= StateIndex{1} << i;
  return s;
}

SpinConfig decode(StateIndex state, const Box& box) {
  if (box.size() > kMaxOracleSites) throw std::invalid_argument("box too large for the exact oracle");
  std::vector<Spin> spins(box.size());
  for (std::uint32_t i = 0; i < spins.size(); ++i) spins[i] = (state >> i) & 1U ? Spin::Plus : Spin::Minus;
  return SpinConfig(box, std::move(spins));
}

GeneratorMatrix::GeneratorMatrix(std::size_t sites)
    : sites_(sites), states_(std::size_t{1} << sites), column_major_(states_ * states_, 0.0) {
  if (sites > kMaxOracleSites) throw std::invalid_argument("at most 12 sites in the exact oracle");
}

bool GeneratorMatrix::is_zero() const {
  return std::all_of(column_major_.begin(), column_major_.end(), [](double v) { return v == 0.0; });
}

GeneratorMatrix build_generator(const ProcessSpec& spec, double at_time) {
  spec.validate();
  const std::size_t n = spec.box.size();
  if (n > kMaxOracleSites) throw std::invalid_argument("exact oracle supports at most 12 sites");
  const Lattice lattice(spec.box, spec.boundary);
  std::vector<bool> frozen(n, false);
  for (std::uint32_t i = 0; i < n; ++i) frozen[i] = spec.freeze.frozen_value(spec.box.site(i), at_time).has_value();

  GeneratorMatrix q(n);
  std::vector<std::int8_t> buf(lattice.buffer_size());
  lattice.init_sentinels(buf);
  for (StateIndex u = 0; u < q.states(); ++u) {
    for (std::uint32_t i = 0; i < n; ++i) buf[i] = (u >> i) & 1U ? 1 : -1;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (frozen[i]) continue;
      const auto& nb = lattice.slots(i);
      const int sum = buf[nb[0]] + buf[nb[1]] + buf[nb[2]] + buf[nb[3]];
      const StateIndex v = u ^ (StateIndex{1} << i);
      double rate = 0.0;
      if (sum == 0)
        rate = 0.5;
      else if ((sum > 0) != (buf[i] > 0))
        rate = 1.0;
      if (rate > 0.0) {
        q.add(u, v, rate);
        q.add(u, u, -rate);
      }
    }
  }
  return q;
}

std::vector<GeneratorSegment> build_piecewise_generators(const ProcessSpec& spec) {
  std::vector<double> cuts = spec.freeze.breakpoints();
  if (cuts.empty() || cuts.front() > 0.0) cuts.insert(cuts.begin(), 0.0);
  std::vector<GeneratorSegment> out;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    // Sample the schedule strictly inside the piece; closed-interval endpoints have measure zero.
    const double probe = k + 1 < cuts.size() ? 0.5 * (cuts[k] + cuts[k + 1]) : cuts[k] + 1.0;
    out.push_back({cuts[k], build_generator(spec, probe)});
  }
  return out;
}

void uniformized_step_serial(const GeneratorMatrix& q, double rate, std::span<const double> in,
                             std::span<double> out, const std::vector<bool>* absorbing) {
  const std::size_t s = q.states();
  const double scale = 1.0 / rate;
  for (std::size_t v = 0; v < s; ++v) {
    const auto col = q.column(static_cast<StateIndex>(v));
    double acc = 0.0;
    for (std::size_t u = 0; u < s; ++u)
      if (!absorbing || !(*absorbing)[u]) acc += in[u] * col[u];
    out[v] = in[v] + scale * acc;
  }
}

void uniformized_step_parallel(const GeneratorMatrix& q, double rate, std::span<const double> in,
                               std::span<double> out, const std::vector<bool>* absorbing) {
  const auto s = static_cast<std::int64_t>(q.states());
  const double scale = 1.0 / rate;
  std::vector<double> live(in.begin(), in.end());
  if (absorbing)
    for (std::size_t u = 0; u < live.size(); ++u)
      if ((*absorbing)[u]) live[u] = 0.0;
#pragma omp parallel for schedule(static)
  for (std::int64_t v = 0; v < s; ++v) {
    const auto col = q.column(static_cast<StateIndex>(v));
    double acc = 0.0;
    for (std::size_t u = 0; u < live.size(); ++u) acc += live[u] * col[u];
    out[static_cast<std::size_t>(v)] = in[static_cast<std::size_t>(v)] + scale * acc;
  }
}

namespace {

void check_distribution(std::span<const double> p, std::size_t states) {
  if (p.size() != states) throw std::invalid_argument("distribution has the wrong number of states");
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("initial distribution must sum to 1");
}

/// Mass moved by freeze onsets at `when`: each state is mapped to the state
/// with newly frozen sites set to their values.
void apply_onsets(const ProcessSpec& spec, double when, std::vector<double>& p, const std::vector<bool>* absorbing) {
  StateIndex set_mask = 0, clear_mask = 0;
  for (const auto& e : spec.freeze.entries()) {
    if (e.start != when) continue;
    for (auto site : e.region.sites()) {
      const StateIndex bit = StateIndex{1} << spec.box.index(site);
      (e.value == Spin::Plus ? set_mask : clear_mask) |= bit;
    }
  }
  if ((set_mask | clear_mask) == 0) return;
  std::vector<double> moved(p.size(), 0.0);
  for (StateIndex u = 0; u < p.size(); ++u) {
    const StateIndex v = (absorbing && (*absorbing)[u]) ? u : ((u | set_mask) & ~clear_mask);
    moved[v] += p[u];
  }
  p.swap(moved);
}

}  // namespace

TransientResult transient_distribution(const GeneratorMatrix& q, std::span<const double> init, double t,
                                       Exec exec, const std::vector<bool>* absorbing) {
  if (!(t >= 0.0)) throw std::invalid_argument("time must be nonnegative");
  check_distribution(init, q.states());
  TransientResult res{std::vector<double>(init.begin(), init.end()), 0.0};
  const double rate = static_cast<double>(q.sites());
  if (t == 0.0 || rate == 0.0 || q.is_zero()) return res;

  const double lt = rate * t;
  std::vector<double> term(init.begin(), init.end()), next(init.size());
  std::vector<double> acc(init.size(), 0.0);
  double cumulative = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double w = std::exp(-lt + static_cast<double>(k) * std::log(lt) - std::lgamma(static_cast<double>(k) + 1.0));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * term[i];
    cumulative += w;
    if (static_cast<double>(k) > lt && 1.0 - cumulative < kUniformizationTail) break;
    if (exec == Exec::Serial)
      uniformized_step_serial(q, rate, term, next, absorbing);
    else
      uniformized_step_parallel(q, rate, term, next, absorbing);
    term.swap(next);
  }
  res.distribution = std::move(acc);
  res.truncation_error = std::max(0.0, 1.0 - cumulative);
  return res;
}

TransientResult transient_piecewise(const ProcessSpec& spec, std::span<const double> init, double t,
                                    const std::vector<bool>* absorbing) {
  const auto segments = build_piecewise_generators(spec);
  std::vector<double> p(init.begin(), init.end());
  check_distribution(p, std::size_t{1} << spec.box.size());
  double error = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const double start = segments[k].start;
    if (start > t) break;
    // Onsets at t = 0 shape the initial state, before anything can have been hit.
    apply_onsets(spec, start, p, start > 0.0 ? absorbing : nullptr);
    const double end = k + 1 < segments.size() ? std::min(t, segments[k + 1].start) : t;
    auto r = transient_distribution(segments[k].generator, p, end - start, Exec::Parallel, absorbing);
    p = std::move(r.distribution);
    error += r.truncation_error;
    // Renormalize the dropped tail so the next piece accepts the input.
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& x : p) x /= total;
  }
  return {std::move(p), error};
}

namespace {

std::vector<bool> target_mask(std::size_t states, const std::function<bool(StateIndex)>& target) {
  std::vector<bool> mask(states);
  for (StateIndex u = 0; u < states; ++u) mask[u] = target(u);
  return mask;
}

double mass_on(const std::vector<double>& p, const std::vector<bool>& mask) {
  double m = 0.0;
  for (std::size_t u = 0; u < p.size(); ++u)
    if (mask[u]) m += p[u];
  return m;
}

}  // namespace

double hitting_probability(const GeneratorMatrix& q, std::span<const double> init,
                           const std::function<bool(StateIndex)>& target, double horizon, Exec exec) {
  const auto mask = target_mask(q.states(), target);
  const auto res = transient_distribution(q, init, horizon, exec, &mask);
  return mass_on(res.distribution, mask);
}

double hitting_probability_piecewise(const ProcessSpec& spec, std::span<const double> init,
                                     const std::function<bool(StateIndex)>& target, double horizon) {
  const auto mask = target_mask(std::size_t{1} << spec.box.size(), target);
  const auto res = transient_piecewise(spec, init, horizon, &mask);
  return mass_on(res.distribution, mask);
}

std::vector<double> initial_law(const ProcessSpec& spec) {
  spec.validate();
  const std::size_t n = spec.box.size();
  if (n > kMaxOracleSites) throw std::invalid_argument("exact oracle supports at most 12 sites");
  // Per-site probability of +1 after forcing.
  std::vector<double> plus(n, spec.init.density);
  for (const auto& f : spec.init.forced) {
    const auto sites = f.region.sites();
    for (std::size_t k = 0; k < sites.size(); ++k) plus[spec.box.index(sites[k])] = f.pattern[k] == Spin::Plus ? 1.0 : 0.0;
  }
  std::vector<double> p(std::size_t{1} << n);
  for (StateIndex u = 0; u < p.size(); ++u) {
    double w = 1.0;
    for (std::size_t i = 0; i < n; ++i) w *= (u >> i) & 1U ? plus[i] : 1.0 - plus[i];
    p[u] = w;
  }
  return p;
}

std::vector<double> point_mass(const SpinConfig& config) {
  std::vector<double> p(std::size_t{1} << config.size(), 0.0);
  p[encode(config)] = 1.0;
  return p;
}

double erlang_cdf(int m, double horizon) {
  if (m < 1) throw std::invalid_argument("Erlang shape must be >= 1");
  if (!(horizon >= 0.0)) throw std::invalid_argument("time must be nonnegative");
  if (horizon == 0.0) return 0.0;
  if (static_cast<double>(m) <= horizon) {
    // Result is not small here, so the complement form loses nothing.
    double term = std::exp(-horizon), head = 0.0;
    for (int k = 0; k < m; ++k) {
      head += term;
      term *= horizon / (k + 1);
    }
    return std::max(0.0, 1.0 - head);
  }
  // sum_{k >= m} e^{-T} T^k / k!, terms decreasing from the first.
  double term = std::exp(-horizon + m * std::log(horizon) - std::lgamma(m + 1.0));
  double tail = 0.0;
  for (int k = m; term > tail * 1e-17; ++k) {
    tail += term;
    term *= horizon / (k + 1);
  }
  return tail;
}

ErlangCheck erlang_tail_check(int m, double horizon, double alpha) {
  if (!(horizon > 0.0)) throw std::invalid_argument("time must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  return {erlang_cdf(m, horizon), std::exp(alpha * horizon - m * std::log1p(alpha))};
}

}  // namespace coarsen
