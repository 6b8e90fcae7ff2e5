#ifndef COARSEN_STATS_HPP
#define COARSEN_STATS_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coarsen/observables.hpp"

namespace coarsen {

/// Two-sided 99% normal quantile used by every interval in the harness.
inline constexpr double kZ99 = 2.576;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double p) const { return lo <= p && p <= hi; }
};

/// Wilson score interval for k successes in n Bernoulli trials.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = kZ99);

struct Estimate {
  double p_hat = 0.0;
  Interval ci;
  std::uint64_t successes = 0;
  std::uint64_t n = 0;         // trials in the denominator
  std::uint64_t censored = 0;  // censored trials (excluded unless conservative)
  bool conservative = false;   // censored counted as non-occurrences
};

class AllCensored : public std::runtime_error {
 public:
  AllCensored() : std::runtime_error("every trial is censored; no estimate") {}
};

Estimate estimate_counts(std::uint64_t successes, std::uint64_t resolved, std::uint64_t censored,
                         bool conservative = false);
/// Estimate over resolved trials; censored trials are counted, not used. Throws AllCensored.
Estimate estimate(std::span<const Outcome> outcomes);
/// Censored trials counted as non-occurrences: a valid lower bound for ">=" claims.
Estimate estimate_conservative(std::span<const Outcome> outcomes);

struct TrialBatch {
  std::string experiment;
  std::uint64_t spec_hash = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<Outcome> outcomes;

  /// Throws if seeds and outcomes disagree in length or a seed repeats.
  void validate() const;
};
Estimate estimate(const TrialBatch& batch);

enum class BoundDirection : std::uint8_t { AtLeast, AtMost };
enum class Verdict : std::uint8_t { Pass, Fail, Inconclusive };
std::string_view to_string(Verdict v);

struct BoundCheck {
  std::string name;
  double bound = 0.0;
  BoundDirection direction = BoundDirection::AtLeast;
  Estimate estimate;
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
};

/// PASS iff the whole interval satisfies the bound, FAIL iff the whole interval violates it.
BoundCheck check_bound(const Estimate& est, double bound, BoundDirection direction, std::string name = {});

/// PASS iff `value` lies inside the interval, FAIL otherwise.
BoundCheck check_contains(const Estimate& est, double value, std::string name = {});

class SpecHashMismatch : public std::invalid_argument {
 public:
  SpecHashMismatch() : std::invalid_argument("Monte Carlo and oracle refer to different specs") {}
};
BoundCheck oracle_crosscheck(const Estimate& mc, std::uint64_t mc_spec_hash, double oracle_probability,
                             std::uint64_t oracle_spec_hash, std::string name = {});

struct ChiSquare {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
};

/// Pearson chi-square against uniform over four categories (3 dof). Needs a total >= 40.
ChiSquare uniformity_test(const std::array<std::uint64_t, 4>& counts);
/// Pearson chi-square with caller-supplied expected counts and degrees of freedom.
ChiSquare chi_square_gof(std::span<const double> observed, std::span<const double> expected, int dof);
/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, int dof);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
/// One-sample Kolmogorov-Smirnov test, asymptotic p-value with the Stephens correction.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace coarsen

#endif  // COARSEN_STATS_HPP
