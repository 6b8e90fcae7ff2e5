#ifndef COARSEN_ENGINE_HPP
#define COARSEN_ENGINE_HPP

#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "coarsen/lattice.hpp"
#include "coarsen/randomness.hpp"

namespace coarsen {

/// Result of applying one ring to one process.
struct Step {
  Spin before = Spin::Plus;
  Spin after = Spin::Plus;
  bool frozen = false;
  bool flipped() const { return before != after; }
};

/// A freeze onset that found the site at the other value and overwrote it.
struct Overwrite {
  double time = 0.0;
  std::uint64_t after_event = 0;  // number of rings processed before the onset
  std::uint32_t site = 0;
  Spin from = Spin::Plus;
  Spin to = Spin::Plus;

  friend bool operator==(const Overwrite&, const Overwrite&) = default;
};

/// Mutable state of one process under one freeze schedule.
///
/// Entries with start == 0 are applied at construction, before any ring.
/// Before each ring at time t, entries with start <= t switch on and entries
/// with end < t switch off (closed intervals).
class Process {
 public:
  Process(const ProcessSpec& spec, const Lattice& lattice, const SpinConfig& initial);

  void advance_schedule(double t) {
    if (next_on_ < on_.size() || next_off_ < off_.size()) advance_slow(t);
  }

  Step apply(const RingEvent& ev) {
    ++events_;
    const std::uint32_t i = ev.site;
    const std::uint32_t row = row_of(i);
    const std::uint32_t col = i - row * width_;
    const std::size_t j = static_cast<std::size_t>(row + 1) * stride_ + col + 1;
    const std::int8_t before = cells_[j];
    if (frozen_sites_ != 0 && freeze_depth_[i] != 0) return {static_cast<Spin>(before), static_cast<Spin>(before), true};
    const int sum = cells_[j - 1] + cells_[j + 1] + cells_[j - stride_] + cells_[j + stride_];
    const int sign = (sum > 0) - (sum < 0);
    const auto next = static_cast<std::int8_t>(sign != 0 ? sign : static_cast<int>(ev.coin));
    cells_[j] = next;
    if (periodic_ && (col == 0 || row == 0 || col + 1 == width_ || row + 1 == height_)) sync_halo(row, col, next);
    return {static_cast<Spin>(before), static_cast<Spin>(next), false};
  }

  Spin spin(std::uint32_t i) const { return static_cast<Spin>(cells_[cell(i)]); }
  bool frozen(std::uint32_t i) const { return freeze_depth_[i] != 0; }
  SpinConfig config() const;
  const Lattice& lattice() const { return *lattice_; }
  std::span<const Overwrite> overwrites() const { return overwrites_; }
  std::uint64_t events() const { return events_; }

 private:
  struct Transition {
    double time;
    std::size_t entry;
  };
  void advance_slow(double t);
  void activate(std::size_t entry, double t);
  std::uint32_t row_of(std::uint32_t i) const {
    return width_ == 1 ? i : static_cast<std::uint32_t>((static_cast<unsigned __int128>(div_magic_) * i) >> 64);
  }
  std::size_t cell(std::uint32_t i) const {
    const std::uint32_t row = row_of(i);
    return static_cast<std::size_t>(row + 1) * stride_ + (i - row * width_) + 1;
  }
  void set(std::uint32_t i, std::int8_t v);
  void sync_halo(std::uint32_t row, std::uint32_t col, std::int8_t v);

  // Spins live in a (width+2) x (height+2) grid whose outer ring holds the
  // boundary: constant for fixed and free boundaries, a copy of the opposite
  // edge for periodic ones.
  const Lattice* lattice_;
  std::uint32_t width_, height_, stride_;
  std::uint64_t div_magic_;  // floor(2^64 / width) + 1: exact division for 32-bit indices
  bool periodic_;
  std::vector<std::int8_t> cells_;
  std::vector<std::uint16_t> freeze_depth_;
  std::size_t frozen_sites_ = 0;
  std::vector<std::vector<std::uint32_t>> entry_sites_;
  std::vector<std::int8_t> entry_value_;
  std::vector<Transition> on_, off_;
  std::size_t next_on_ = 0, next_off_ = 0;
  std::vector<Overwrite> overwrites_;
  std::uint64_t events_ = 0;
};

struct StepView {
  std::uint64_t index;  // 1-based; index 0 is the initial configuration
  const RingEvent& event;
  Step step;
};

template <class O>
concept StepObserver = requires(O& o, const StepView& s) {
  o.on_step(s);
  { o.done() } -> std::convertible_to<bool>;
};

struct NullObserver {
  void on_step(const StepView&) {}
  bool done() const { return false; }
};

/// Runs `process` over every ring produced by `source` until it is exhausted
/// or the observer reports done. Returns the number of rings consumed.
template <class Source, StepObserver Observer>
std::uint64_t drive(Process& process, Source& source, Observer& observer) {
  RingEvent ev;
  std::uint64_t index = 0;
  while (!observer.done() && source.next(ev)) {
    ++index;
    process.advance_schedule(ev.time);
    observer.on_step(StepView{index, ev, process.apply(ev)});
  }
  return index;
}

template <class O>
concept CoupledObserver = requires(O& o, std::uint64_t i, const RingEvent& ev,
                                   std::span<const Step> steps, std::span<const Process> ps) {
  o.on_coupled_step(i, ev, steps, ps);
  { o.done() } -> std::convertible_to<bool>;
};

/// Lockstep run of several processes over one ring stream (the standard coupling).
template <class Source, CoupledObserver Observer>
std::uint64_t drive_coupled(std::span<Process> processes, Source& source, Observer& observer) {
  std::vector<Step> steps(processes.size());
  RingEvent ev;
  std::uint64_t index = 0;
  while (!observer.done() && source.next(ev)) {
    ++index;
    for (std::size_t k = 0; k < processes.size(); ++k) {
      processes[k].advance_schedule(ev.time);
      steps[k] = processes[k].apply(ev);
    }
    observer.on_coupled_step(index, ev, std::span<const Step>(steps),
                             std::span<const Process>(processes.data(), processes.size()));
  }
  return index;
}

struct TrajectoryStep {
  RingEvent event;
  Step step;
};

/// Complete record of one run: initial state at t = 0 (after any t = 0
/// freezes), every ring with the spin before and after, the final state.
struct Trajectory {
  ProcessSpec spec;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  SpinConfig initial;
  std::vector<TrajectoryStep> steps;
  SpinConfig final_config;
  std::vector<Overwrite> overwrites;

  std::uint64_t flip_count() const;
  /// Overwrites that happened after the first ring, i.e. not at start-up.
  std::size_t conflicting_onsets() const;
};

class ReplayMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `spec` over `record`, starting from the configuration sampled with the record's seed.
Trajectory run(const ProcessSpec& spec, const RandomnessRecord& record);
/// Same, from an explicit initial configuration.
Trajectory run_from(const ProcessSpec& spec, const SpinConfig& initial, const RandomnessRecord& record);

struct CoupledRun {
  RandomnessRecord record;
  std::vector<ProcessSpec> specs;
  std::vector<Trajectory> trajectories;
};

/// Every spec is run against the identical record. Specs must share box,
/// boundary condition and initial law; freeze schedules may differ.
CoupledRun run_coupled(const std::vector<ProcessSpec>& specs, const RandomnessRecord& record);

/// Re-simulates the recorded rings from the recorded initial state and checks
/// every step and the final state. Throws ReplayMismatch on any difference.
Trajectory replay(const Trajectory& trajectory);

/// Pointwise comparison a >= b over a whole configuration; returns the number of violating sites.
std::size_t domination_violations(const SpinConfig& upper, const SpinConfig& lower);

}  // namespace coarsen

#endif  // COARSEN_ENGINE_HPP
