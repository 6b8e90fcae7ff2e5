#ifndef COARSEN_ORACLE_HPP
#define COARSEN_ORACLE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "coarsen/lattice.hpp"

namespace coarsen {

// Exact analysis of the coarsening chain on boxes of at most 12 sites.

inline constexpr std::size_t kMaxOracleSites = 12;

/// Bit i holds the spin of site i (Box::index order); 1 means +1.
using StateIndex = std::uint32_t;

StateIndex encode(const SpinConfig& config);
SpinConfig decode(StateIndex state, const Box& box);

/// Dense 2^N x 2^N rate matrix. Stored column-major so that the forward
/// equation p' = p Q reads contiguous memory per output state.
class GeneratorMatrix {
 public:
  GeneratorMatrix() = default;
  GeneratorMatrix(std::size_t sites);

  std::size_t sites() const { return sites_; }
  std::size_t states() const { return states_; }
  double at(StateIndex from, StateIndex to) const { return column_major_[to * states_ + from]; }
  void add(StateIndex from, StateIndex to, double rate) { column_major_[to * states_ + from] += rate; }
  double exit_rate(StateIndex from) const { return -at(from, from); }
  std::span<const double> column(StateIndex to) const {
    return {column_major_.data() + static_cast<std::size_t>(to) * states_, states_};
  }
  bool is_zero() const;

 private:
  std::size_t sites_ = 0;
  std::size_t states_ = 0;
  std::vector<double> column_major_;
};

/// Generator of the process with the freeze schedule as it stands at time
/// `at_time`. Frozen sites never flip; a non-frozen site moves to the strict
/// majority at rate 1, and flips at rate 1/2 on a tie.
GeneratorMatrix build_generator(const ProcessSpec& spec, double at_time = 0.0);

/// Constant-schedule pieces of a time-dependent freeze schedule.
struct GeneratorSegment {
  double start = 0.0;
  GeneratorMatrix generator;
};
std::vector<GeneratorSegment> build_piecewise_generators(const ProcessSpec& spec);

enum class Exec { Serial, Parallel };

struct TransientResult {
  std::vector<double> distribution;
  double truncation_error = 0.0;  // Poisson tail mass dropped
};

inline constexpr double kUniformizationTail = 1e-12;

/// p(t) = p(0) e^{Qt} by uniformization with rate N (the number of sites).
/// States flagged in `absorbing` have their outgoing rates removed.
TransientResult transient_distribution(const GeneratorMatrix& q, std::span<const double> init, double t,
                                       Exec exec = Exec::Parallel, const std::vector<bool>* absorbing = nullptr);

/// Transient law of a time-dependent schedule, composing the constant pieces.
/// Freeze onsets at a breakpoint move mass onto states carrying the frozen values.
TransientResult transient_piecewise(const ProcessSpec& spec, std::span<const double> init, double t,
                                    const std::vector<bool>* absorbing = nullptr);

/// P(the chain visits a target state during [0, T]).
double hitting_probability(const GeneratorMatrix& q, std::span<const double> init,
                           const std::function<bool(StateIndex)>& target, double horizon,
                           Exec exec = Exec::Parallel);
double hitting_probability_piecewise(const ProcessSpec& spec, std::span<const double> init,
                                     const std::function<bool(StateIndex)>& target, double horizon);

/// Exact law of the initial configuration: product measure with density
/// `init.density`, forced sites fixed to their pattern.
std::vector<double> initial_law(const ProcessSpec& spec);

/// Point mass on one configuration.
std::vector<double> point_mass(const SpinConfig& config);

/// Serial reference and OpenMP kernel for one uniformized step
/// out = in + (1/rate) * (in restricted to non-absorbing states) Q.
void uniformized_step_serial(const GeneratorMatrix& q, double rate, std::span<const double> in,
                             std::span<double> out, const std::vector<bool>* absorbing);
void uniformized_step_parallel(const GeneratorMatrix& q, double rate, std::span<const double> in,
                               std::span<double> out, const std::vector<bool>* absorbing);

/// P(Erlang(m, 1) < T) = 1 - e^{-T} sum_{k<m} T^k / k!.
double erlang_cdf(int m, double horizon);

struct ErlangCheck {
  double exact = 0.0;
  double bound = 0.0;  // e^{aT} / (1+a)^m
};
ErlangCheck erlang_tail_check(int m, double horizon, double alpha);

}  // namespace coarsen

#endif  // COARSEN_ORACLE_HPP
