#ifndef COARSEN_LATTICE_HPP
#define COARSEN_LATTICE_HPP

#include <array>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coarsen/rng.hpp"

namespace coarsen {

enum class Spin : std::int8_t { Minus = -1, Plus = 1 };

constexpr int value(Spin s) { return static_cast<int>(s); }
constexpr Spin flipped(Spin s) { return s == Spin::Plus ? Spin::Minus : Spin::Plus; }
inline Spin spin_from_int(int v) {
  if (v != 1 && v != -1) throw std::invalid_argument("spin must be +1 or -1");
  return static_cast<Spin>(v);
}

struct Site {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Site&, const Site&) = default;
  friend constexpr Site operator+(Site a, Site b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Site operator-(Site a, Site b) { return {a.x - b.x, a.y - b.y}; }
};

inline constexpr Site kOrigin{0, 0};

enum class Direction : std::uint8_t { Right = 0, Left = 1, Up = 2, Down = 3 };
inline constexpr std::array<Direction, 4> kDirections{Direction::Right, Direction::Left,
                                                      Direction::Up, Direction::Down};
constexpr Site offset(Direction d) {
  switch (d) {
    case Direction::Right: return {1, 0};
    case Direction::Left: return {-1, 0};
    case Direction::Up: return {0, 1};
    case Direction::Down: return {0, -1};
  }
  return {0, 0};
}
std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view name);

enum class Boundary : std::uint8_t { Periodic, FixedPlus, FixedMinus, Free };
std::string_view to_string(Boundary bc);
Boundary boundary_from_string(std::string_view name);

/// Axis-aligned rectangle of lattice sites [x_min, x_max] x [y_min, y_max].
///
/// The usual box {-L..L}^2 comes from `centered`. Rectangles with even sides
/// are needed when two sites must be exchanged by the box's point reflection
/// and their midpoint is not a lattice site.
class Box {
 public:
  Box() = default;
  Box(Site lo, Site hi);

  static Box centered(int half_width, Site center = kOrigin);
  /// Box of half-width `half_width` whose point reflection s -> a + b - s
  /// exchanges `a` and `b`. Along an axis where a + b is odd the side is
  /// 2 * half_width.
  static Box symmetric_about(Site a, Site b, int half_width);

  Site lo() const { return lo_; }
  Site hi() const { return hi_; }
  int width() const { return hi_.x - lo_.x + 1; }
  int height() const { return hi_.y - lo_.y + 1; }
  std::size_t size() const {
    return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
  }
  bool contains(Site s) const {
    return s.x >= lo_.x && s.x <= hi_.x && s.y >= lo_.y && s.y <= hi_.y;
  }
  bool contains(const Box& other) const { return contains(other.lo_) && contains(other.hi_); }
  std::uint32_t index(Site s) const {
    return static_cast<std::uint32_t>((s.y - lo_.y) * width() + (s.x - lo_.x));
  }
  Site site(std::uint32_t index) const {
    const int w = width();
    return {lo_.x + static_cast<int>(index) % w, lo_.y + static_cast<int>(index) / w};
  }
  std::vector<Site> sites() const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  Site lo_{0, 0};
  Site hi_{0, 0};
};

/// A neighbor slot is either an in-box site or the virtual spin of a fixed boundary.
using NeighborRef = std::variant<Site, Spin>;

/// Precomputed neighbor table for a box under a boundary condition.
///
/// Internally every site has exactly four slots. Off-box slots point at one of
/// three sentinel indices past the end of the box: a permanent +1, a permanent
/// -1, and a permanent 0 used for missing neighbors under Free boundaries. A
/// spin buffer of size `buffer_size()` with those sentinels filled lets the
/// update rule be a plain sum over four slots.
class Lattice {
 public:
  Lattice(Box box, Boundary bc);

  const Box& box() const { return box_; }
  Boundary boundary() const { return bc_; }
  std::size_t size() const { return box_.size(); }
  std::size_t buffer_size() const { return box_.size() + 3; }
  std::uint32_t plus_slot() const { return static_cast<std::uint32_t>(size()); }
  std::uint32_t minus_slot() const { return plus_slot() + 1; }
  std::uint32_t empty_slot() const { return plus_slot() + 2; }

  const std::array<std::uint32_t, 4>& slots(std::uint32_t index) const { return table_[index]; }
  std::vector<NeighborRef> neighbors(Site s) const;
  /// In-box neighbor indices only (periodic wraps included).
  std::vector<std::uint32_t> site_neighbors(std::uint32_t index) const;
  /// Fills the three sentinel entries of an engine spin buffer.
  void init_sentinels(std::span<std::int8_t> buffer) const;

 private:
  Box box_;
  Boundary bc_;
  std::vector<std::array<std::uint32_t, 4>> table_;
};

/// Strict majority of the neighbor spins; `coin` on an exact tie.
Spin majority_update(Spin current, std::span<const Spin> neighbor_spins, Spin coin);

/// Spin configuration on a finite box, indexed by `Box::index`.
class SpinConfig {
 public:
  SpinConfig() = default;
  SpinConfig(Box box, Spin fill);
  SpinConfig(Box box, std::vector<Spin> spins);

  const Box& box() const { return box_; }
  std::size_t size() const { return spins_.size(); }
  Spin operator[](std::uint32_t i) const { return spins_[i]; }
  Spin& operator[](std::uint32_t i) { return spins_[i]; }
  Spin at(Site s) const;
  void set(Site s, Spin v);
  std::span<const Spin> spins() const { return spins_; }

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

 private:
  Box box_;
  std::vector<Spin> spins_;
};

/// Finite set of sites, kept sorted and unique.
class Region {
 public:
  Region() = default;
  explicit Region(std::vector<Site> sites);
  static Region of(const Box& box);
  static Region single(Site s) { return Region({s}); }

  std::span<const Site> sites() const { return sites_; }
  bool contains(Site s) const;
  bool empty() const { return sites_.empty(); }
  std::size_t size() const { return sites_.size(); }

  friend bool operator==(const Region&, const Region&) = default;

 private:
  std::vector<Site> sites_;
};

struct ForcedRegion {
  Region region;
  std::vector<Spin> pattern;  // aligned with region.sites()

  static ForcedRegion uniform(Region region, Spin value);
  friend bool operator==(const ForcedRegion&, const ForcedRegion&) = default;
};

struct InitSpec {
  double density = 0.5;  // P(site starts at +1)
  std::vector<ForcedRegion> forced;

  void validate(const Box& box) const;
  friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

inline constexpr double kForever = std::numeric_limits<double>::infinity();

struct FreezeEntry {
  Region region;
  Spin value = Spin::Plus;
  double start = 0.0;
  double end = kForever;  // closed interval [start, end]

  friend bool operator==(const FreezeEntry&, const FreezeEntry&) = default;
};

/// Time-scheduled freezing. Overlapping entries are allowed only when they
/// agree on the frozen value.
class FreezeSchedule {
 public:
  FreezeSchedule() = default;
  explicit FreezeSchedule(std::vector<FreezeEntry> entries);

  /// Origin frozen to +1 on [0, inf).
  static FreezeSchedule origin_plus();
  /// Box {-L..L}^2 frozen to +1 on [0, until], origin frozen to +1 on [0, inf).
  static FreezeSchedule box_then_origin(int half_width, double until);

  std::optional<Spin> frozen_value(Site s, double t) const;
  std::span<const FreezeEntry> entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  /// Times at which the set of frozen sites can change, sorted and unique.
  std::vector<double> breakpoints() const;

  friend bool operator==(const FreezeSchedule&, const FreezeSchedule&) = default;

 private:
  std::vector<FreezeEntry> entries_;
};

struct ProcessSpec {
  Box box;
  Boundary boundary = Boundary::Periodic;
  InitSpec init;
  FreezeSchedule freeze;

  void validate() const;
  friend bool operator==(const ProcessSpec&, const ProcessSpec&) = default;
};

/// Forced all-plus initial region {-L..L}^2 around `center`.
InitSpec forced_plus_box(int half_width, Site center = kOrigin, double density = 0.5);

/// i.i.d. draw with one uniform per site in index order, then forced regions
/// overwrite. The draw count does not depend on the forcing, so two specs
/// that differ only in forcing agree everywhere outside the forced sites.
SpinConfig sample_initial(const InitSpec& init, const Box& box, Rng& rng);

}  // namespace coarsen

#endif  // COARSEN_LATTICE_HPP
