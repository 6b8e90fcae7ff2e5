#include "coarsen/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace coarsen {

static_assert(std::endian::native == std::endian::little, "trajectory dumps assume a little-endian host");

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t stable_hash(const json& j) { return fnv1a64(j.dump()); }

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

json to_json(Site s) { return json::array({s.x, s.y}); }

Site site_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("site must be [x, y]");
  return {j[0].get<int>(), j[1].get<int>()};
}

json to_json(const Box& box) { return {{"lo", to_json(box.lo())}, {"hi", to_json(box.hi())}}; }

Box box_from_json(const json& j) {
  if (j.contains("half_width")) {
    const Site c = j.contains("center") ? site_from_json(j.at("center")) : kOrigin;
    return Box::centered(j.at("half_width").get<int>(), c);
  }
  return Box(site_from_json(j.at("lo")), site_from_json(j.at("hi")));
}

Region region_from_json(const json& j) {
  if (j.contains("sites")) {
    std::vector<Site> sites;
    for (const auto& s : j.at("sites")) sites.push_back(site_from_json(s));
    return Region(std::move(sites));
  }
  if (j.contains("site")) return Region::single(site_from_json(j.at("site")));
  if (j.contains("box")) return Region::of(box_from_json(j.at("box")));
  throw std::invalid_argument("region needs one of: sites, site, box");
}

namespace {

json sites_json(const Region& r) {
  json arr = json::array();
  for (auto s : r.sites()) arr.push_back(to_json(s));
  return arr;
}

double time_from_json(const json& j) { return j.is_null() ? kForever : j.get<double>(); }
json time_to_json(double t) { return std::isfinite(t) ? json(t) : json(nullptr); }

}  // namespace

json to_json(const ProcessSpec& spec) {
  json forced = json::array();
  for (const auto& f : spec.init.forced) {
    json pattern = json::array();
    for (auto s : f.pattern) pattern.push_back(value(s));
    forced.push_back({{"sites", sites_json(f.region)}, {"pattern", pattern}});
  }
  json freeze = json::array();
  for (const auto& e : spec.freeze.entries())
    freeze.push_back({{"sites", sites_json(e.region)},
                      {"value", value(e.value)},
                      {"start", e.start},
                      {"end", time_to_json(e.end)}});
  return {{"box", to_json(spec.box)},
          {"boundary", std::string(to_string(spec.boundary))},
          {"init", {{"density", spec.init.density}, {"forced", forced}}},
          {"freeze", freeze}};
}

ProcessSpec spec_from_json(const json& j) {
  ProcessSpec spec;
  spec.box = box_from_json(j.at("box"));
  spec.boundary = boundary_from_string(j.value("boundary", std::string("periodic")));
  if (j.contains("init")) {
    const auto& init = j.at("init");
    spec.init.density = init.value("density", 0.5);
    for (const auto& f : init.value("forced", json::array())) {
      Region r = region_from_json(f);
      if (f.contains("pattern")) {
        std::vector<Spin> pattern;
        for (const auto& v : f.at("pattern")) pattern.push_back(spin_from_int(v.get<int>()));
        spec.init.forced.push_back({std::move(r), std::move(pattern)});
      } else {
        spec.init.forced.push_back(ForcedRegion::uniform(std::move(r), spin_from_int(f.value("value", 1))));
      }
    }
  }
  std::vector<FreezeEntry> entries;
  for (const auto& e : j.value("freeze", json::array()))
    entries.push_back({region_from_json(e), spin_from_int(e.value("value", 1)), e.value("start", 0.0),
                       e.contains("end") ? time_from_json(e.at("end")) : kForever});
  spec.freeze = FreezeSchedule(std::move(entries));
  spec.validate();
  return spec;
}

std::uint64_t spec_hash(const ProcessSpec& spec) { return stable_hash(to_json(spec)); }

json to_json(const Outcome& o) {
  json j{{"status", std::string(to_string(o.status))},
         {"time", std::isfinite(o.time) ? json(o.time) : json(nullptr)},
         {"event", o.event_index}};
  if (o.count) j["count"] = o.count;
  if (o.first) j["first"] = std::string(to_string(*o.first));
  return j;
}

json to_json(const Estimate& e) {
  return {{"p_hat", e.p_hat}, {"lo", e.ci.lo},          {"hi", e.ci.hi},
          {"n", e.n},         {"successes", e.successes}, {"censored", e.censored},
          {"conservative", e.conservative}};
}

json to_json(const BoundCheck& c) {
  json j{{"name", c.name},
         {"bound", c.bound},
         {"direction", c.direction == BoundDirection::AtLeast ? ">=" : "<="},
         {"estimate", to_json(c.estimate)},
         {"verdict", std::string(to_string(c.verdict))}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

namespace {

template <class T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw std::runtime_error("truncated trajectory file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void put_config(std::ostream& os, const SpinConfig& c) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.size()));
  for (auto s : c.spins()) put<std::int8_t>(os, static_cast<std::int8_t>(s));
}

SpinConfig get_config(std::istream& is, const Box& box) {
  const auto n = get<std::uint32_t>(is);
  if (n != box.size()) throw std::runtime_error("configuration size does not match the box");
  std::vector<Spin> spins(n);
  for (auto& s : spins) s = spin_from_int(get<std::int8_t>(is));
  return SpinConfig(box, std::move(spins));
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const Trajectory& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  const std::string spec = to_json(t.spec).dump();
  os.write(kTrajectoryMagic, sizeof(kTrajectoryMagic));
  put<std::uint32_t>(os, kTrajectoryVersion);
  put<std::uint32_t>(os, 0);
  put<std::uint64_t>(os, t.seed);
  put<std::uint64_t>(os, spec_hash(t.spec));
  put<std::uint64_t>(os, t.steps.size());
  put<double>(os, t.horizon);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(spec.size()));
  os.write(spec.data(), static_cast<std::streamsize>(spec.size()));
  put_config(os, t.initial);
  for (const auto& s : t.steps) {
    put<double>(os, s.event.time);
    put<std::uint32_t>(os, s.event.site);
    put<std::int8_t>(os, static_cast<std::int8_t>(s.event.coin));
    put<std::int8_t>(os, static_cast<std::int8_t>(s.step.before));
    put<std::int8_t>(os, static_cast<std::int8_t>(s.step.after));
    put<std::uint8_t>(os, s.step.frozen ? 1 : 0);
  }
  put_config(os, t.final_config);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.overwrites.size()));
  for (const auto& o : t.overwrites) {
    put<double>(os, o.time);
    put<std::uint64_t>(os, o.after_event);
    put<std::uint32_t>(os, o.site);
    put<std::int8_t>(os, static_cast<std::int8_t>(o.from));
    put<std::int8_t>(os, static_cast<std::int8_t>(o.to));
    put<std::uint16_t>(os, 0);
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kTrajectoryMagic, 8) != 0)
    throw std::runtime_error("not a trajectory file");
  if (get<std::uint32_t>(is) != kTrajectoryVersion) throw std::runtime_error("unsupported trajectory version");
  get<std::uint32_t>(is);
  Trajectory t;
  t.seed = get<std::uint64_t>(is);
  const auto hash = get<std::uint64_t>(is);
  const auto count = get<std::uint64_t>(is);
  t.horizon = get<double>(is);
  std::string spec(get<std::uint32_t>(is), '\0');
  if (!is.read(spec.data(), static_cast<std::streamsize>(spec.size()))) throw std::runtime_error("truncated spec");
  t.spec = spec_from_json(json::parse(spec));
  if (spec_hash(t.spec) != hash) throw std::runtime_error("spec hash mismatch in trajectory header");
  t.initial = get_config(is, t.spec.box);
  t.steps.resize(count);
  for (auto& s : t.steps) {
    s.event.time = get<double>(is);
    s.event.site = get<std::uint32_t>(is);
    if (s.event.site >= t.spec.box.size()) throw std::runtime_error("event site outside the box");
    s.event.coin = spin_from_int(get<std::int8_t>(is));
    s.step.before = spin_from_int(get<std::int8_t>(is));
    s.step.after = spin_from_int(get<std::int8_t>(is));
    s.step.frozen = get<std::uint8_t>(is) != 0;
  }
  t.final_config = get_config(is, t.spec.box);
  t.overwrites.resize(get<std::uint32_t>(is));
  for (auto& o : t.overwrites) {
    o.time = get<double>(is);
    o.after_event = get<std::uint64_t>(is);
    o.site = get<std::uint32_t>(is);
    o.from = spin_from_int(get<std::int8_t>(is));
    o.to = spin_from_int(get<std::int8_t>(is));
    get<std::uint16_t>(is);
  }
  return t;
}

void write_pgm(const std::filesystem::path& path, const SpinConfig& config) {
  const Box& b = config.box();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "P5\n" << b.width() << " " << b.height() << "\n255\n";
  for (int y = b.hi().y; y >= b.lo().y; --y)
    for (int x = b.lo().x; x <= b.hi().x; ++x)
      os.put(config.at({x, y}) == Spin::Plus ? static_cast<char>(255) : static_cast<char>(0));
}

void write_pgm_heatmap(const std::filesystem::path& path, const Box& b, std::span<const double> values) {
  if (values.size() != b.size()) throw std::invalid_argument("heatmap size does not match the box");
  const double top = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "P5\n" << b.width() << " " << b.height() << "\n255\n";
  for (int y = b.hi().y; y >= b.lo().y; --y)
    for (int x = b.lo().x; x <= b.hi().x; ++x) {
      const double v = top > 0.0 ? values[b.index({x, y})] / top : 0.0;
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
}

}  // namespace coarsen
