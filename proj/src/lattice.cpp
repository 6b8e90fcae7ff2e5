#include "coarsen/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "coarsen/rng.hpp"

namespace coarsen {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Right: return "right";
    case Direction::Left: return "left";
    case Direction::Up: return "up";
    case Direction::Down: return "down";
  }
  return "?";
}

Direction direction_from_string(std::string_view name) {
  for (auto d : kDirections)
    if (to_string(d) == name) return d;
  throw std::invalid_argument("unknown direction: " + std::string(name));
}

std::string_view to_string(Boundary bc) {
  switch (bc) {
    case Boundary::Periodic: return "periodic";
    case Boundary::FixedPlus: return "fixed_plus";
    case Boundary::FixedMinus: return "fixed_minus";
    case Boundary::Free: return "free";
  }
  return "?";
}

Boundary boundary_from_string(std::string_view name) {
  for (auto bc : {Boundary::Periodic, Boundary::FixedPlus, Boundary::FixedMinus, Boundary::Free})
    if (to_string(bc) == name) return bc;
  throw std::invalid_argument("unknown boundary condition: " + std::string(name));
}

Box::Box(Site lo, Site hi) : lo_(lo), hi_(hi) {
  if (hi.x < lo.x || hi.y < lo.y) throw std::invalid_argument("box corners out of order");
}

Box Box::centered(int half_width, Site center) {
  if (half_width < 1) throw std::invalid_argument("box half-width must be >= 1");
  return Box({center.x - half_width, center.y - half_width},
             {center.x + half_width, center.y + half_width});
}

Box Box::symmetric_about(Site a, Site b, int half_width) {
  if (half_width < 1) throw std::invalid_argument("box half-width must be >= 1");
  // Along each axis, s -> (a + b) - s maps [lo, hi] onto itself iff lo + hi = a + b.
  auto axis = [half_width](int sum) {
    const int half = static_cast<int>(std::floor((sum + 1) / 2.0));
    const int lo = half - half_width;
    return std::pair{lo, sum - lo};
  };
  auto [xlo, xhi] = axis(a.x + b.x);
  auto [ylo, yhi] = axis(a.y + b.y);
  return Box({xlo, ylo}, {xhi, yhi});
}

std::vector<Site> Box::sites() const {
  std::vector<Site> out;
  out.reserve(size());
  for (std::uint32_t i = 0; i < size(); ++i) out.push_back(site(i));
  return out;
}

Lattice::Lattice(Box box, Boundary bc) : box_(box), bc_(bc) {
  if (bc == Boundary::Periodic && (box.width() < 3 || box.height() < 3))
    throw std::invalid_argument("periodic boundary needs side length >= 3");
  table_.resize(box.size());
  const int w = box.width();
  const int h = box.height();
  for (std::uint32_t i = 0; i < box.size(); ++i) {
    const Site s = box.site(i);
    for (auto d : kDirections) {
      Site n = s + offset(d);
      std::uint32_t slot = empty_slot();
      if (box.contains(n)) {
        slot = box.index(n);
      } else {
        switch (bc) {
          case Boundary::Periodic:
            n.x = box.lo().x + ((n.x - box.lo().x) % w + w) % w;
            n.y = box.lo().y + ((n.y - box.lo().y) % h + h) % h;
            slot = box.index(n);
            break;
          case Boundary::FixedPlus: slot = plus_slot(); break;
          case Boundary::FixedMinus: slot = minus_slot(); break;
          case Boundary::Free: slot = empty_slot(); break;
        }
      }
      table_[i][static_cast<std::size_t>(d)] = slot;
    }
  }
}

std::vector<NeighborRef> Lattice::neighbors(Site s) const {
  if (!box_.contains(s)) throw std::out_of_range("site outside box");
  std::vector<NeighborRef> out;
  for (auto slot : table_[box_.index(s)]) {
    if (slot < size())
      out.emplace_back(box_.site(slot));
    else if (slot == plus_slot())
      out.emplace_back(Spin::Plus);
    else if (slot == minus_slot())
      out.emplace_back(Spin::Minus);
  }
  return out;
}

std::vector<std::uint32_t> Lattice::site_neighbors(std::uint32_t index) const {
  std::vector<std::uint32_t> out;
  for (auto slot : table_[index])
    if (slot < size()) out.push_back(slot);
  return out;
}

void Lattice::init_sentinels(std::span<std::int8_t> buffer) const {
  buffer[plus_slot()] = 1;
  buffer[minus_slot()] = -1;
  buffer[empty_slot()] = 0;
}

Spin majority_update(Spin /*current*/, std::span<const Spin> neighbor_spins, Spin coin) {
  if (neighbor_spins.empty()) throw std::invalid_argument("majority update needs at least one neighbor");
  int sum = 0;
  for (auto s : neighbor_spins) sum += value(s);
  if (sum > 0) return Spin::Plus;
  if (sum < 0) return Spin::Minus;
  return coin;
}

SpinConfig::SpinConfig(Box box, Spin fill) : box_(box), spins_(box.size(), fill) {}

SpinConfig::SpinConfig(Box box, std::vector<Spin> spins) : box_(box), spins_(std::move(spins)) {
  if (spins_.size() != box_.size()) throw std::invalid_argument("spin vector does not match box");
}

Spin SpinConfig::at(Site s) const {
  if (!box_.contains(s)) throw std::out_of_range("site outside box");
  return spins_[box_.index(s)];
}

void SpinConfig::set(Site s, Spin v) {
  if (!box_.contains(s)) throw std::out_of_range("site outside box");
  spins_[box_.index(s)] = v;
}

Region::Region(std::vector<Site> sites) : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
}

Region Region::of(const Box& box) { return Region(box.sites()); }

bool Region::contains(Site s) const { return std::binary_search(sites_.begin(), sites_.end(), s); }

ForcedRegion ForcedRegion::uniform(Region region, Spin v) {
  std::vector<Spin> pattern(region.size(), v);
  return {std::move(region), std::move(pattern)};
}

void InitSpec::validate(const Box& box) const {
  if (!(density >= 0.0 && density <= 1.0)) throw std::invalid_argument("density must lie in [0, 1]");
  for (const auto& f : forced) {
    if (f.pattern.size() != f.region.size())
      throw std::invalid_argument("forced pattern size does not match its region");
    for (auto s : f.region.sites())
      if (!box.contains(s)) throw std::invalid_argument("forced region leaves the box");
  }
}

FreezeSchedule::FreezeSchedule(std::vector<FreezeEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (!(e.start >= 0.0)) throw std::invalid_argument("freeze interval must start at t >= 0");
    if (!(e.start <= e.end)) throw std::invalid_argument("freeze interval has start > end");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i)
    for (std::size_t j = i + 1; j < entries_.size(); ++j) {
      const auto& a = entries_[i];
      const auto& b = entries_[j];
      if (a.value == b.value) continue;
      if (a.end < b.start || b.end < a.start) continue;
      for (auto s : a.region.sites())
        if (b.region.contains(s))
          throw std::invalid_argument("conflicting freeze entries overlap in space and time");
    }
}

FreezeSchedule FreezeSchedule::origin_plus() {
  return FreezeSchedule({FreezeEntry{Region::single(kOrigin), Spin::Plus, 0.0, kForever}});
}

FreezeSchedule FreezeSchedule::box_then_origin(int half_width, double until) {
  return FreezeSchedule({
      FreezeEntry{Region::of(Box::centered(half_width)), Spin::Plus, 0.0, until},
      FreezeEntry{Region::single(kOrigin), Spin::Plus, 0.0, kForever},
  });
}

std::optional<Spin> FreezeSchedule::frozen_value(Site s, double t) const {
  for (const auto& e : entries_)
    if (t >= e.start && t <= e.end && e.region.contains(s)) return e.value;
  return std::nullopt;
}

std::vector<double> FreezeSchedule::breakpoints() const {
  std::vector<double> out;
  for (const auto& e : entries_) {
    out.push_back(e.start);
    if (std::isfinite(e.end)) out.push_back(e.end);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void ProcessSpec::validate() const {
  Lattice probe(box, boundary);  // rejects degenerate periodic boxes
  init.validate(box);
  for (const auto& e : freeze.entries())
    for (auto s : e.region.sites())
      if (!box.contains(s)) throw std::invalid_argument("freeze region leaves the box");
}

InitSpec forced_plus_box(int half_width, Site center, double density) {
  InitSpec init;
  init.density = density;
  init.forced.push_back(ForcedRegion::uniform(Region::of(Box::centered(half_width, center)), Spin::Plus));
  return init;
}

SpinConfig sample_initial(const InitSpec& init, const Box& box, Rng& rng) {
  init.validate(box);
  std::vector<Spin> spins(box.size());
  for (auto& s : spins) s = uniform01(rng) < init.density ? Spin::Plus : Spin::Minus;
  SpinConfig config(box, std::move(spins));
  for (const auto& f : init.forced) {
    auto sites = f.region.sites();
    for (std::size_t k = 0; k < sites.size(); ++k) config.set(sites[k], f.pattern[k]);
  }
  return config;
}

}  // namespace coarsen
