#include "coarsen/observables.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace coarsen {

namespace {

constexpr Site kRightNeighbor{1, 0};

std::string site_str(Site s) {
  std::ostringstream os;
  os << "(" << s.x << "," << s.y << ")";
  return os.str();
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Occurred: return "occurred";
    case Status::NotOccurred: return "not_occurred";
    case Status::Censored: return "censored";
  }
  return "?";
}

std::string describe(const ObservableSpec& spec) {
  std::ostringstream os;
  std::visit(
      [&os](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, NeighborMinus>) {
          os << "neighbor_minus(from=" << o.from << ")";
        } else if constexpr (std::is_same_v<T, FirstNeighborMinus>) {
          os << "first_neighbor_minus(from=" << o.from << ",direction=" << to_string(o.direction) << ")";
        } else if constexpr (std::is_same_v<T, WindowMinus>) {
          os << "window_minus(from=" << o.from << ",to=" << o.to << ")";
        } else if constexpr (std::is_same_v<T, BoxStaysPlus>) {
          os << "box_stays_plus(L=" << o.half_width << ",until=" << o.until << ")";
        } else if constexpr (std::is_same_v<T, FlipCount>) {
          os << "flip_count(site=" << site_str(o.site) << ")";
        } else if constexpr (std::is_same_v<T, FirstPassage>) {
          os << "first_passage(site=" << site_str(o.site) << ",value=" << value(o.value) << ")";
        } else {
          os << "race(z=" << site_str(o.z) << ")";
        }
      },
      spec);
  return os.str();
}

Detector::Detector(const ObservableSpec& spec, const Box& box) : spec_(spec), box_(box) {
  std::vector<Site> watched;
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, NeighborMinus>) {
          kind_ = Kind::Neighbor;
          from_ = o.from;
          watched = {kRightNeighbor};
        } else if constexpr (std::is_same_v<T, FirstNeighborMinus>) {
          kind_ = Kind::First;
          from_ = o.from;
          for (auto d : kDirections) watched.push_back(kOrigin + offset(d));
        } else if constexpr (std::is_same_v<T, WindowMinus>) {
          kind_ = Kind::Window;
          from_ = o.from;
          to_ = o.to;
          if (!(o.from <= o.to)) throw std::invalid_argument("window must satisfy from <= to");
          watched = {kRightNeighbor};
        } else if constexpr (std::is_same_v<T, BoxStaysPlus>) {
          kind_ = Kind::Box;
          to_ = o.until;
          const Box inner = Box::centered(o.half_width);
          if (!box.contains(inner)) throw std::out_of_range("observed box leaves the simulation box");
          watched = inner.sites();
        } else if constexpr (std::is_same_v<T, FlipCount>) {
          kind_ = Kind::Flips;
          watched = {o.site};
        } else if constexpr (std::is_same_v<T, FirstPassage>) {
          kind_ = Kind::Passage;
          watched = {o.site};
        } else {
          kind_ = Kind::Race;
          if (o.z == kOrigin) throw std::invalid_argument("race site must differ from the origin");
          watched = {o.z, kOrigin};
        }
      },
      spec);
  if (!(from_ >= 0.0)) throw std::invalid_argument("observable window must start at t >= 0");
  if (watched.size() > 255 && kind_ != Kind::Box) throw std::invalid_argument("too many watched sites");
  watch_.assign(box.size(), 0);
  for (std::size_t k = 0; k < watched.size(); ++k) {
    if (!box.contains(watched[k])) throw std::out_of_range("observed site " + site_str(watched[k]) + " is outside the box");
    const auto i = box.index(watched[k]);
    sites_.push_back(i);
    // Box watches many sites with identical roles; slot 1 stands for all of them.
    watch_[i] = static_cast<std::uint8_t>(kind_ == Kind::Box ? 1 : k + 1);
  }
  current_.assign(sites_.size(), Spin::Plus);
}

void Detector::begin(const SpinConfig& initial) {
  if (!(initial.box() == box_)) throw std::invalid_argument("initial configuration on a different box");
  for (std::size_t k = 0; k < sites_.size(); ++k) current_[k] = initial[sites_[k]];
  outcome_ = Outcome{};
  finished_ = false;
  window_open_ = false;
  last_index_ = 0;
  if (from_ <= 0.0) open_window(0);
}

void Detector::resolve(Status s, double time, std::uint64_t index) {
  outcome_.status = s;
  outcome_.time = time;
  outcome_.event_index = index;
  finished_ = true;
}

void Detector::open_window(std::uint64_t index) {
  window_open_ = true;
  switch (kind_) {
    case Kind::Neighbor:
    case Kind::Window:
      if (current_[0] == Spin::Minus) resolve(Status::Occurred, from_, index);
      break;
    case Kind::First: {
      std::vector<std::size_t> minus;
      for (std::size_t k = 0; k < 4; ++k)
        if (current_[k] == Spin::Minus) minus.push_back(k);
      if (minus.size() == 1) {
        outcome_.first = kDirections[minus[0]];
        const auto want = std::get<FirstNeighborMinus>(spec_).direction;
        resolve(*outcome_.first == want ? Status::Occurred : Status::NotOccurred, from_, index);
      } else if (minus.size() > 1) {
        resolve(Status::NotOccurred, from_, index);
      }
      break;
    }
    case Kind::Box:
      if (std::any_of(current_.begin(), current_.end(), [](Spin s) { return s != Spin::Plus; }))
        resolve(Status::NotOccurred, from_, index);
      break;
    case Kind::Passage:
      if (current_[0] == std::get<FirstPassage>(spec_).value) resolve(Status::Occurred, from_, index);
      break;
    case Kind::Race: {
      const bool z = current_[0] == Spin::Minus;
      const bool o = current_[1] == Spin::Minus;
      if (z && o)
        resolve(Status::Censored, from_, index);
      else if (z)
        resolve(Status::Occurred, from_, index);
      else if (o)
        resolve(Status::NotOccurred, from_, index);
      break;
    }
    case Kind::Flips: break;
  }
}

void Detector::close_window(std::uint64_t index) {
  if (kind_ == Kind::Window)
    resolve(Status::NotOccurred, to_, index);
  else if (kind_ == Kind::Box)
    resolve(Status::Occurred, to_, index);
}

void Detector::observe(const StepView& v) {
  const Spin after = v.step.after;
  if (kind_ == Kind::Box) {
    if (after == Spin::Minus) resolve(Status::NotOccurred, v.event.time, v.index);
    return;
  }
  const std::size_t slot = watch_[v.event.site] - 1U;
  current_[slot] = after;
  if (!window_open_) return;
  switch (kind_) {
    case Kind::Neighbor:
    case Kind::Window:
      if (after == Spin::Minus) resolve(Status::Occurred, v.event.time, v.index);
      break;
    case Kind::First:
      if (after == Spin::Minus) {
        outcome_.first = kDirections[slot];
        const auto want = std::get<FirstNeighborMinus>(spec_).direction;
        resolve(*outcome_.first == want ? Status::Occurred : Status::NotOccurred, v.event.time, v.index);
      }
      break;
    case Kind::Passage:
      if (after == std::get<FirstPassage>(spec_).value) resolve(Status::Occurred, v.event.time, v.index);
      break;
    case Kind::Race:
      if (after == Spin::Minus)
        resolve(slot == 0 ? Status::Occurred : Status::NotOccurred, v.event.time, v.index);
      break;
    case Kind::Flips:
      if (v.step.flipped()) ++outcome_.count;
      break;
    case Kind::Box: break;
  }
}

Outcome Detector::finish(double horizon) {
  if (kind_ == Kind::Flips) {
    outcome_.status = Status::Occurred;
    outcome_.time = horizon;
    outcome_.event_index = last_index_;
    return outcome_;
  }
  if (!finished_ && !window_open_ && horizon >= from_) open_window(last_index_);
  if (!finished_ && window_open_ && horizon >= to_) close_window(last_index_);
  if (!finished_) outcome_.status = Status::Censored;
  return outcome_;
}

Outcome detect(const Trajectory& trajectory, const ObservableSpec& spec) {
  const double horizon = trajectory.horizon;
  if (const auto* w = std::get_if<WindowMinus>(&spec); w && w->to > horizon)
    throw std::invalid_argument("window ends after the trajectory horizon");
  if (const auto* b = std::get_if<BoxStaysPlus>(&spec); b && b->until > horizon)
    throw std::invalid_argument("box window ends after the trajectory horizon");
  Detector d(spec, trajectory.spec.box);
  d.begin(trajectory.initial);
  for (std::size_t k = 0; k < trajectory.steps.size() && !d.done(); ++k)
    d.on_step(StepView{k + 1, trajectory.steps[k].event, trajectory.steps[k].step});
  return d.finish(horizon);
}

std::vector<std::uint64_t> flip_counts(const Trajectory& trajectory) {
  std::vector<std::uint64_t> counts(trajectory.spec.box.size(), 0);
  for (const auto& s : trajectory.steps)
    if (s.step.flipped()) ++counts[s.event.site];
  return counts;
}

}  // namespace coarsen
