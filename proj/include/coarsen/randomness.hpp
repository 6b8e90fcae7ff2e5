#ifndef COARSEN_RANDOMNESS_HPP
#define COARSEN_RANDOMNESS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <boost/random/exponential_distribution.hpp>

#include "coarsen/lattice.hpp"
#include "coarsen/rng.hpp"

namespace coarsen {

/// One clock ring. Every ring carries a coin; it is read only on ties.
struct RingEvent {
  double time = 0.0;
  std::uint32_t site = 0;
  Spin coin = Spin::Plus;

  friend bool operator==(const RingEvent&, const RingEvent&) = default;
};

/// Superposition of independent rate-1 Poisson clocks on `n_sites` sites:
/// global Exponential(n_sites) gaps, uniform site, fair coin.
///
/// Per ring: the gap is a Boost ziggurat draw (usually one word), then one
/// word gives the site (Lemire, high bits) and the coin (bit 0).
class RingStream {
 public:
  RingStream(std::size_t n_sites, std::uint64_t seed, double horizon);

  bool next(RingEvent& ev) {
    time_ += exp_(rng_) * inv_rate_;
    if (time_ > horizon_) return false;
    ev.time = time_;
    const std::uint64_t w = rng_();
    ev.coin = (w & 1U) ? Spin::Plus : Spin::Minus;
    ev.site = static_cast<std::uint32_t>(bounded_from(w, rng_, n_));
    return true;
  }

  double horizon() const { return horizon_; }

 private:
  Rng rng_;
  boost::random::exponential_distribution<double> exp_;
  std::uint64_t n_;
  double inv_rate_;
  double horizon_;
  double time_ = 0.0;
};

/// Materialized ring stream. Shared verbatim by every process in a coupling.
struct RandomnessRecord {
  std::uint64_t seed = 0;
  Box box;
  double horizon = 0.0;
  std::vector<RingEvent> events;
};

RandomnessRecord generate_randomness(const Box& box, double horizon, std::uint64_t seed);

/// Walks a materialized record with the same `next` interface as RingStream.
class RecordSource {
 public:
  explicit RecordSource(std::span<const RingEvent> events) : events_(events) {}
  bool next(RingEvent& ev) {
    if (pos_ == events_.size()) return false;
    ev = events_[pos_++];
    return true;
  }

 private:
  std::span<const RingEvent> events_;
  std::size_t pos_ = 0;
};

/// Initial configuration of `spec` driven by the initial-state sub-stream of `seed`.
SpinConfig initial_config(const ProcessSpec& spec, std::uint64_t seed);

}  // namespace coarsen

#endif  // COARSEN_RANDOMNESS_HPP
