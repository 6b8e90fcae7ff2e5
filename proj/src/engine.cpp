#include "coarsen/engine.hpp"

#include <algorithm>

namespace coarsen {

Process::Process(const ProcessSpec& spec, const Lattice& lattice, const SpinConfig& initial)
    : lattice_(&lattice),
      width_(static_cast<std::uint32_t>(lattice.box().width())),
      height_(static_cast<std::uint32_t>(lattice.box().height())),
      stride_(width_ + 2),
      div_magic_(width_ == 1 ? 0 : ~std::uint64_t{0} / width_ + 1),
      periodic_(lattice.boundary() == Boundary::Periodic),
      cells_(static_cast<std::size_t>(stride_) * (height_ + 2), 0),
      freeze_depth_(lattice.size(), 0) {
  if (!(spec.box == lattice.box()) || spec.boundary != lattice.boundary())
    throw std::invalid_argument("process spec does not match lattice");
  if (!(initial.box() == lattice.box())) throw std::invalid_argument("initial configuration on a different box");
  spec.validate();
  const std::int8_t rim = lattice.boundary() == Boundary::FixedPlus ? 1 : (lattice.boundary() == Boundary::FixedMinus ? -1 : 0);
  std::fill(cells_.begin(), cells_.end(), rim);
  for (std::uint32_t i = 0; i < lattice.size(); ++i) set(i, static_cast<std::int8_t>(initial[i]));

  const auto entries = spec.freeze.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    std::vector<std::uint32_t> idx;
    for (auto s : entries[e].region.sites()) idx.push_back(lattice.box().index(s));
    entry_sites_.push_back(std::move(idx));
    entry_value_.push_back(static_cast<std::int8_t>(entries[e].value));
    on_.push_back({entries[e].start, e});
    off_.push_back({entries[e].end, e});
  }
  auto by_time = [](const Transition& a, const Transition& b) {
    return a.time < b.time || (a.time == b.time && a.entry < b.entry);
  };
  std::sort(on_.begin(), on_.end(), by_time);
  std::sort(off_.begin(), off_.end(), by_time);
  advance_schedule(0.0);
}

void Process::sync_halo(std::uint32_t row, std::uint32_t col, std::int8_t v) {
  const std::size_t r = static_cast<std::size_t>(row + 1) * stride_;
  if (col == 0) cells_[r + width_ + 1] = v;
  if (col + 1 == width_) cells_[r] = v;
  if (row == 0) cells_[static_cast<std::size_t>(height_ + 1) * stride_ + col + 1] = v;
  if (row + 1 == height_) cells_[col + 1] = v;
}

void Process::set(std::uint32_t i, std::int8_t v) {
  const std::uint32_t row = row_of(i);
  const std::uint32_t col = i - row * width_;
  cells_[static_cast<std::size_t>(row + 1) * stride_ + col + 1] = v;
  if (periodic_) sync_halo(row, col, v);
}

void Process::advance_slow(double t) {
  for (;;) {
    const bool can_on = next_on_ < on_.size() && on_[next_on_].time <= t;
    const bool can_off = next_off_ < off_.size() && off_[next_off_].time < t;
    if (!can_on && !can_off) return;
    // Earlier transition first; an entry ending at s is released before one starting at s.
    if (can_off && (!can_on || off_[next_off_].time <= on_[next_on_].time)) {
      for (auto i : entry_sites_[off_[next_off_].entry])
        if (--freeze_depth_[i] == 0) --frozen_sites_;
      ++next_off_;
    } else {
      activate(on_[next_on_].entry, on_[next_on_].time);
      ++next_on_;
    }
  }
}

void Process::activate(std::size_t entry, double t) {
  const std::int8_t v = entry_value_[entry];
  for (auto i : entry_sites_[entry]) {
    if (freeze_depth_[i]++ == 0) ++frozen_sites_;
    const auto current = static_cast<std::int8_t>(spin(i));
    if (current != v) {
      overwrites_.push_back({t, events_, i, static_cast<Spin>(current), static_cast<Spin>(v)});
      set(i, v);
    }
  }
}

SpinConfig Process::config() const {
  std::vector<Spin> out(lattice_->size());
  for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = spin(i);
  return SpinConfig(lattice_->box(), std::move(out));
}

std::uint64_t Trajectory::flip_count() const {
  return static_cast<std::uint64_t>(
      std::count_if(steps.begin(), steps.end(), [](const TrajectoryStep& s) { return s.step.flipped(); }));
}

std::size_t Trajectory::conflicting_onsets() const {
  return static_cast<std::size_t>(
      std::count_if(overwrites.begin(), overwrites.end(), [](const Overwrite& o) { return o.after_event > 0; }));
}

namespace {

struct Recorder {
  std::vector<TrajectoryStep>* steps;
  void on_step(const StepView& v) { steps->push_back({v.event, v.step}); }
  bool done() const { return false; }
};

}  // namespace

Trajectory run_from(const ProcessSpec& spec, const SpinConfig& initial, const RandomnessRecord& record) {
  if (!(record.box == spec.box)) throw std::invalid_argument("record box does not match spec box");
  Lattice lattice(spec.box, spec.boundary);
  Process process(spec, lattice, initial);
  Trajectory traj;
  traj.spec = spec;
  traj.seed = record.seed;
  traj.horizon = record.horizon;
  traj.initial = process.config();
  traj.steps.reserve(record.events.size());
  RecordSource source(record.events);
  Recorder rec{&traj.steps};
  drive(process, source, rec);
  traj.final_config = process.config();
  traj.overwrites.assign(process.overwrites().begin(), process.overwrites().end());
  return traj;
}

Trajectory run(const ProcessSpec& spec, const RandomnessRecord& record) {
  return run_from(spec, initial_config(spec, record.seed), record);
}

CoupledRun run_coupled(const std::vector<ProcessSpec>& specs, const RandomnessRecord& record) {
  if (specs.empty()) throw std::invalid_argument("coupled run needs at least one spec");
  for (const auto& s : specs) {
    if (!(s.box == specs.front().box) || s.boundary != specs.front().boundary)
      throw std::invalid_argument("coupled specs must share box and boundary condition");
    if (!(s.init == specs.front().init))
      throw std::invalid_argument("coupled specs must share the initial law");
  }
  CoupledRun out{record, specs, {}};
  const SpinConfig initial = initial_config(specs.front(), record.seed);
  for (const auto& s : specs) out.trajectories.push_back(run_from(s, initial, record));
  return out;
}

Trajectory replay(const Trajectory& trajectory) {
  RandomnessRecord record{trajectory.seed, trajectory.spec.box, trajectory.horizon, {}};
  record.events.reserve(trajectory.steps.size());
  for (const auto& s : trajectory.steps) record.events.push_back(s.event);
  for (std::size_t k = 1; k < record.events.size(); ++k)
    if (!(record.events[k - 1].time < record.events[k].time))
      throw ReplayMismatch("ring times are not strictly increasing at event " + std::to_string(k + 1));
  Trajectory again = run_from(trajectory.spec, trajectory.initial, record);
  if (!(again.initial == trajectory.initial)) throw ReplayMismatch("initial configuration violates the freeze schedule");
  for (std::size_t k = 0; k < again.steps.size(); ++k) {
    const auto& a = again.steps[k].step;
    const auto& b = trajectory.steps[k].step;
    if (a.before != b.before || a.after != b.after || a.frozen != b.frozen)
      throw ReplayMismatch("step " + std::to_string(k + 1) + " differs on replay");
  }
  if (!(again.final_config == trajectory.final_config)) throw ReplayMismatch("final configuration differs on replay");
  return again;
}

std::size_t domination_violations(const SpinConfig& upper, const SpinConfig& lower) {
  if (!(upper.box() == lower.box())) throw std::invalid_argument("configurations live on different boxes");
  std::size_t bad = 0;
  for (std::uint32_t i = 0; i < upper.size(); ++i)
    if (value(upper[i]) < value(lower[i])) ++bad;
  return bad;
}

}  // namespace coarsen
