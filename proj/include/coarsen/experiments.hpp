#ifndef COARSEN_EXPERIMENTS_HPP
#define COARSEN_EXPERIMENTS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "coarsen/io.hpp"
#include "coarsen/lattice.hpp"
#include "coarsen/stats.hpp"

namespace coarsen {

inline constexpr const char* kEngineVersion = "coarsen 1.0.0";

/// Parsed experiment configuration. `raw` is the canonical JSON the config
/// hash is computed from (output_dir excluded, CLI overrides applied).
struct ExperimentConfig {
  std::string experiment;
  bool auto_size = false;
  int half_width = 0;  // used when !auto_size
  double eps = 1e-6;
  int inner_half_width = 0;
  Boundary boundary = Boundary::Periodic;
  double horizon = 0.0;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  json params = json::object();
  std::filesystem::path output_dir;
  json raw;

  std::uint64_t hash() const { return stable_hash(raw); }
  /// Box half-width: explicit, or the safe margin for (sizing_horizon, eps,
  /// max(inner half-width, min_inner)).
  int resolve_half_width(double sizing_horizon, int min_inner = 0) const;
  void set_seed(std::uint64_t s);
  void set_trials(std::size_t n);
};

ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Frame {
  std::string name;
  SpinConfig config;
};

struct Heatmap {
  std::string name;
  Box box;
  std::vector<double> values;  // Box::index order
};

using Table = std::vector<std::vector<std::string>>;  // header row first

struct ExperimentResult {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::vector<std::string> jsonl;  // one line per trial record
  std::vector<BoundCheck> checks;
  std::vector<std::pair<std::string, Table>> tables;  // extra CSV files
  json extra = json::object();
  std::vector<Frame> frames;
  std::vector<Heatmap> heatmaps;
  double wall_seconds = 0.0;

  bool any_fail() const;
};

struct RunOptions {
  int jobs = 1;
};

ExperimentResult exp_first_neighbor_symmetry(const ExperimentConfig& cfg, const RunOptions& opt);
ExperimentResult exp_propagation(const ExperimentConfig& cfg, const RunOptions& opt);
ExperimentResult exp_domination(const ExperimentConfig& cfg, const RunOptions& opt);
ExperimentResult exp_race_symmetry(const ExperimentConfig& cfg, const RunOptions& opt);
ExperimentResult exp_flip_growth(const ExperimentConfig& cfg, const RunOptions& opt);
ExperimentResult exp_frozen_sets(const ExperimentConfig& cfg, const RunOptions& opt);

using ExperimentFn = ExperimentResult (*)(const ExperimentConfig&, const RunOptions&);

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> claims;       // entries of known_claims()
  std::vector<std::string> observables;  // observable kinds exercised
  ExperimentFn run;
};

const std::vector<ExperimentInfo>& registry();
const ExperimentInfo& find_experiment(const std::string& name);
/// Every result the registry must cover.
const std::vector<std::string>& known_claims();

/// Runs the configured experiment and stamps the wall-clock time.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt);

/// trials.jsonl, summary.csv, verdicts.json, extra tables and PGM frames under `dir`.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// Point reflection s -> a + b - s maps `box` and `region` onto themselves.
bool point_symmetric(const Box& box, const Region& region, Site a, Site b);

/// Monte Carlo estimate of P(site takes `target` at some time in [0, horizon]).
Estimate monte_carlo_hitting(const ProcessSpec& spec, Site site, Spin target, double horizon, std::size_t trials,
                             std::uint64_t seed, int jobs);

/// Exact answer for an oracle event config:
///   {"spec": {...}, "target": {"site": [x,y], "value": -1}, "horizon": T}
/// Returns {"state_space_hash", "event", "probability", "error_bound"}.
json run_oracle_query(const json& query);

}  // namespace coarsen

#endif  // COARSEN_EXPERIMENTS_HPP
