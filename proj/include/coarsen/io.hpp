#ifndef COARSEN_IO_HPP
#define COARSEN_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "coarsen/engine.hpp"
#include "coarsen/lattice.hpp"
#include "coarsen/observables.hpp"
#include "coarsen/stats.hpp"

namespace coarsen {

using json = nlohmann::json;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// Hash of the canonical serialization (object keys sorted, no whitespace).
std::uint64_t stable_hash(const json& j);
std::string hex64(std::uint64_t v);

json to_json(Site s);
Site site_from_json(const json& j);
json to_json(const Box& box);
Box box_from_json(const json& j);
/// Accepts {"sites": [[x,y],...]}, {"site": [x,y]} or {"box": {"half_width": L, "center": [x,y]}}.
Region region_from_json(const json& j);
json to_json(const ProcessSpec& spec);
ProcessSpec spec_from_json(const json& j);
std::uint64_t spec_hash(const ProcessSpec& spec);

json to_json(const Outcome& o);
json to_json(const Estimate& e);
json to_json(const BoundCheck& c);

/// Binary trajectory dump; layout in docs/trajectory_format.md.
inline constexpr char kTrajectoryMagic[8] = {'C', 'R', 'S', 'N', 'T', 'R', 'J', '1'};
inline constexpr std::uint32_t kTrajectoryVersion = 1;

void write_trajectory(const std::filesystem::path& path, const Trajectory& t);
Trajectory read_trajectory(const std::filesystem::path& path);

/// Binary PGM (P5), one byte per site, 0 for -1 and 255 for +1; top row is the largest y.
void write_pgm(const std::filesystem::path& path, const SpinConfig& config);
/// Grey-level PGM of arbitrary per-site values scaled to 0..255.
void write_pgm_heatmap(const std::filesystem::path& path, const Box& box, std::span<const double> values);

}  // namespace coarsen

#endif  // COARSEN_IO_HPP
