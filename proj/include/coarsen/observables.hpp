#ifndef COARSEN_OBSERVABLES_HPP
#define COARSEN_OBSERVABLES_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "coarsen/engine.hpp"
#include "coarsen/lattice.hpp"

namespace coarsen {

/// Site (1,0) is -1 at some time t >= from.
struct NeighborMinus {
  double from = 0.0;
};
/// Neighbor `direction` of the origin is the first of the four to be -1 in [from, horizon].
struct FirstNeighborMinus {
  double from = 0.0;
  Direction direction = Direction::Right;
};
/// Site (1,0) is -1 at some time t in [from, to].
struct WindowMinus {
  double from = 0.0;
  double to = 0.0;
};
/// Every site of {-L..L}^2 holds +1 throughout [0, until].
struct BoxStaysPlus {
  int half_width = 1;
  double until = 0.0;
};
struct FlipCount {
  Site site;
};
struct FirstPassage {
  Site site;
  Spin value = Spin::Minus;
};
/// Site z reaches -1 strictly before the origin does.
struct Race {
  Site z;
};

using ObservableSpec =
    std::variant<NeighborMinus, FirstNeighborMinus, WindowMinus, BoxStaysPlus, FlipCount, FirstPassage, Race>;

std::string describe(const ObservableSpec& spec);

enum class Status : std::uint8_t { Occurred, NotOccurred, Censored };
std::string_view to_string(Status s);

struct Outcome {
  Status status = Status::Censored;
  double time = std::numeric_limits<double>::quiet_NaN();  // resolution time
  std::uint64_t event_index = 0;                           // 0 = initial configuration
  std::uint64_t count = 0;                                 // FlipCount only
  std::optional<Direction> first;                          // FirstNeighborMinus: who went first

  bool occurred() const { return status == Status::Occurred; }
  bool censored() const { return status == Status::Censored; }
};

/// Online detector for one observable. Feed it the initial configuration,
/// then every step, then the horizon. Values are right-continuous: the value
/// "at time T" includes every ring at time <= T.
///
/// Ties are resolved by event index. Two or more neighbors already at -1 when
/// a FirstNeighborMinus window opens have no strict first; the outcome is
/// NotOccurred for every direction. A Race where both sites start at -1 is
/// reported as Censored.
class Detector {
 public:
  Detector(const ObservableSpec& spec, const Box& box);

  void begin(const SpinConfig& initial);
  void on_step(const StepView& v) {
    if (finished_) return;
    last_index_ = v.index;
    if (!window_open_ && v.event.time > from_) {
      open_window(v.index - 1);
      if (finished_) return;
    }
    if (window_open_ && v.event.time > to_) {
      close_window(v.index - 1);
      return;
    }
    if (watch_[v.event.site] != 0) observe(v);
  }
  bool done() const { return finished_; }
  Outcome finish(double horizon);

  const ObservableSpec& spec() const { return spec_; }

 private:
  enum class Kind : std::uint8_t { Neighbor, First, Window, Box, Flips, Passage, Race };

  void open_window(std::uint64_t index);
  void close_window(std::uint64_t index);
  void observe(const StepView& v);
  void resolve(Status s, double time, std::uint64_t index);

  ObservableSpec spec_;
  Kind kind_;
  Box box_;
  double from_ = 0.0;
  double to_ = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> sites_;  // watched site indices
  std::vector<std::uint8_t> watch_;   // per box site: 1 + slot in sites_, or 0
  std::vector<Spin> current_;
  bool window_open_ = false;
  std::uint64_t last_index_ = 0;
  bool finished_ = false;
  Outcome outcome_;
};

/// Evaluates an observable on a recorded trajectory. Throws if a site of the
/// spec is outside the box or a WindowMinus/BoxStaysPlus window ends after the horizon.
Outcome detect(const Trajectory& trajectory, const ObservableSpec& spec);

/// Sign changes per site, indexed by Box::index. Frozen sites report 0.
std::vector<std::uint64_t> flip_counts(const Trajectory& trajectory);

/// Streaming per-site flip counter.
struct FlipCounter {
  std::vector<std::uint64_t> counts;
  explicit FlipCounter(std::size_t n) : counts(n, 0) {}
  void on_step(const StepView& v) {
    if (v.step.flipped()) ++counts[v.event.site];
  }
  bool done() const { return false; }
};

}  // namespace coarsen

#endif  // COARSEN_OBSERVABLES_HPP
