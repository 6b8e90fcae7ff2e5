#include "coarsen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

namespace coarsen {

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) throw std::invalid_argument("Wilson interval needs at least one trial");
  if (successes > trials) throw std::invalid_argument("more successes than trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Estimate estimate_counts(std::uint64_t successes, std::uint64_t resolved, std::uint64_t censored, bool conservative) {
  const std::uint64_t n = conservative ? resolved + censored : resolved;
  if (n == 0) throw AllCensored();
  Estimate e;
  e.successes = successes;
  e.n = n;
  e.censored = censored;
  e.conservative = conservative;
  e.p_hat = static_cast<double>(successes) / static_cast<double>(n);
  e.ci = wilson_interval(successes, n);
  // Rounding can leave the endpoint a hair inside the point estimate.
  e.ci.lo = std::min(e.ci.lo, e.p_hat);
  e.ci.hi = std::max(e.ci.hi, e.p_hat);
  return e;
}

namespace {

Estimate tally(std::span<const Outcome> outcomes, bool conservative) {
  std::uint64_t k = 0, resolved = 0, censored = 0;
  for (const auto& o : outcomes) {
    if (o.censored()) {
      ++censored;
    } else {
      ++resolved;
      if (o.occurred()) ++k;
    }
  }
  return estimate_counts(k, resolved, censored, conservative);
}

}  // namespace

Estimate estimate(std::span<const Outcome> outcomes) { return tally(outcomes, false); }
Estimate estimate_conservative(std::span<const Outcome> outcomes) { return tally(outcomes, true); }

void TrialBatch::validate() const {
  if (seeds.size() != outcomes.size()) throw std::invalid_argument("one seed per outcome required");
  std::set<std::uint64_t> seen(seeds.begin(), seeds.end());
  if (seen.size() != seeds.size()) throw std::invalid_argument("trial seeds must be distinct");
}

Estimate estimate(const TrialBatch& batch) {
  batch.validate();
  return estimate(std::span<const Outcome>(batch.outcomes));
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

BoundCheck check_bound(const Estimate& est, double bound, BoundDirection direction, std::string name) {
  BoundCheck c{std::move(name), bound, direction, est, Verdict::Inconclusive, {}};
  if (direction == BoundDirection::AtLeast) {
    if (est.ci.lo >= bound)
      c.verdict = Verdict::Pass;
    else if (est.ci.hi < bound)
      c.verdict = Verdict::Fail;
  } else {
    if (est.ci.hi <= bound)
      c.verdict = Verdict::Pass;
    else if (est.ci.lo > bound)
      c.verdict = Verdict::Fail;
  }
  return c;
}

BoundCheck check_contains(const Estimate& est, double v, std::string name) {
  BoundCheck c{std::move(name), v, BoundDirection::AtLeast, est, Verdict::Fail, "interval must contain the value"};
  if (est.ci.contains(v)) c.verdict = Verdict::Pass;
  return c;
}

BoundCheck oracle_crosscheck(const Estimate& mc, std::uint64_t mc_spec_hash, double oracle_probability,
                             std::uint64_t oracle_spec_hash, std::string name) {
  if (mc_spec_hash != oracle_spec_hash) throw SpecHashMismatch();
  return check_contains(mc, oracle_probability, std::move(name));
}

double chi_square_sf(double statistic, int dof) {
  if (dof < 1) throw std::invalid_argument("chi-square needs at least one degree of freedom");
  if (statistic <= 0.0) return 1.0;
  const boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

ChiSquare chi_square_gof(std::span<const double> observed, std::span<const double> expected, int dof) {
  if (observed.size() != expected.size()) throw std::invalid_argument("observed/expected size mismatch");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw std::invalid_argument("expected counts must be positive");
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  return {stat, chi_square_sf(stat, dof), dof};
}

ChiSquare uniformity_test(const std::array<std::uint64_t, 4>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total < 40.0) throw std::invalid_argument("uniformity test needs a total count >= 40");
  std::array<double, 4> obs{}, exp{};
  for (std::size_t i = 0; i < 4; ++i) {
    obs[i] = static_cast<double>(counts[i]);
    exp[i] = total / 4.0;
  }
  return chi_square_gof(obs, exp, 3);
}

namespace {

/// Kolmogorov distribution upper tail Q(x) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 x^2}.
double kolmogorov_sf(double x) {
  if (x < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("KS test needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double rn = std::sqrt(n);
  return {d, kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)};
}

}  // namespace coarsen
