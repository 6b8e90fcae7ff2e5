#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "coarsen/engine.hpp"
#include "coarsen/experiments.hpp"
#include "coarsen/io.hpp"
#include "coarsen/margin.hpp"
#include "coarsen/trials.hpp"

namespace fs = std::filesystem;
using namespace coarsen;

namespace {

constexpr const char* kOutputEnv = "COARSEN_OUTPUT_DIR";

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return json::parse(is);
}

void print_checks(const ExperimentResult& r) {
  for (const auto& c : r.checks) {
    std::cout << "  [" << to_string(c.verdict) << "] " << c.name;
    if (c.estimate.n) std::cout << "  p_hat=" << c.estimate.p_hat << " ci=[" << c.estimate.ci.lo << ", " << c.estimate.ci.hi << "]";
    if (!c.note.empty()) std::cout << "  (" << c.note << ")";
    std::cout << '\n';
  }
}

int cmd_run(const std::string& name, const fs::path& config, std::optional<std::uint64_t> seed,
            std::optional<std::size_t> trials, int jobs, const std::string& out) {
  auto cfg = load_config(config);
  if (cfg.experiment != name)
    throw std::invalid_argument("config is for experiment '" + cfg.experiment + "', not '" + name + "'");
  if (seed) cfg.set_seed(*seed);
  if (trials) cfg.set_trials(*trials);
  fs::path dir = cfg.output_dir;
  if (const char* env = std::getenv(kOutputEnv); env && *env) dir = env;
  if (!out.empty()) dir = out;

  const auto result = run_experiment(cfg, RunOptions{jobs});
  write_outputs(result, dir);
  std::cout << cfg.experiment << " config=" << hex64(result.config_hash) << " trials=" << cfg.trials
            << " wall=" << result.wall_seconds << "s -> " << dir.string() << '\n';
  print_checks(result);
  return result.any_fail() ? 1 : 0;
}

int cmd_oracle(const fs::path& query_path, std::size_t mc_trials, std::uint64_t seed, int jobs) {
  const json query = read_json(query_path);
  json out = run_oracle_query(query);
  int status = 0;
  if (mc_trials > 0) {
    const auto spec = spec_from_json(query.at("spec"));
    const auto& target = query.at("target");
    const auto est = monte_carlo_hitting(spec, site_from_json(target.at("site")),
                                         spin_from_int(target.value("value", -1)), query.at("horizon").get<double>(),
                                         mc_trials, seed, jobs);
    const auto check = oracle_crosscheck(est, spec_hash(spec), out.at("probability").get<double>(), spec_hash(spec),
                                         "exact probability inside the Monte Carlo 99% interval");
    out["monte_carlo"] = to_json(check);
    status = check.verdict == Verdict::Fail ? 1 : 0;
  }
  std::cout << out.dump(2) << '\n';
  return status;
}

int cmd_simulate(const fs::path& spec_path, std::uint64_t seed, double horizon, const fs::path& out) {
  const auto spec = spec_from_json(read_json(spec_path));
  const auto traj = run(spec, generate_randomness(spec.box, horizon, seed));
  write_trajectory(out, traj);
  std::cout << "wrote " << out.string() << ": " << traj.steps.size() << " rings, " << traj.flip_count()
            << " flips, spec_hash=" << hex64(spec_hash(spec)) << '\n';
  return 0;
}

int cmd_replay(const fs::path& file) {
  const auto traj = read_trajectory(file);
  try {
    replay(traj);
  } catch (const ReplayMismatch& e) {
    std::cout << "MISMATCH: " << e.what() << '\n';
    return 1;
  }
  std::cout << "OK: " << traj.steps.size() << " rings, " << traj.flip_count() << " flips replayed identically"
            << " (seed=" << traj.seed << ", spec_hash=" << hex64(spec_hash(traj.spec)) << ")\n";
  return 0;
}

int cmd_report(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "verdicts.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no verdicts.json under " + dir.string());

  std::ofstream csv(dir / "report.csv");
  csv << "experiment,config_hash,check,verdict,p_hat,lo,hi\n";
  std::size_t pass = 0, fail = 0, inconclusive = 0;
  for (const auto& f : files) {
    const json v = read_json(f);
    const auto exp = v.at("experiment").get<std::string>();
    std::cout << exp << " (" << f.parent_path().string() << ")\n";
    for (const auto& c : v.at("checks")) {
      const auto verdict = c.at("verdict").get<std::string>();
      const auto& e = c.at("estimate");
      std::cout << "  [" << verdict << "] " << c.at("name").get<std::string>() << '\n';
      std::string name = c.at("name").get<std::string>();
      std::string quoted = "\"";
      for (char ch : name) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      quoted += '"';
      csv << exp << ',' << v.at("config_hash").get<std::string>() << ',' << quoted << ',' << verdict << ','
          << e.at("p_hat").get<double>() << ',' << e.at("lo").get<double>() << ',' << e.at("hi").get<double>() << '\n';
      if (verdict == "PASS")
        ++pass;
      else if (verdict == "FAIL")
        ++fail;
      else
        ++inconclusive;
    }
  }
  std::cout << pass << " pass, " << fail << " fail, " << inconclusive << " inconclusive\n";
  return fail ? 1 : 0;
}

int cmd_margin(double horizon, double eps, int inner) {
  const int margin = compute_safe_margin(horizon, eps, inner);
  const auto b = boundary_influence_bound(horizon, inner, margin);
  std::cout << json{{"T", horizon},        {"eps", eps},         {"L", inner},
                    {"L_prime", margin},   {"bound", b.value},   {"alpha", b.alpha},
                    {"sites", (2 * margin + 1) * (2 * margin + 1)}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_list() {
  for (const auto& e : registry()) {
    std::cout << e.name << ": " << e.summary << "\n  claims:";
    for (const auto& c : e.claims) std::cout << " [" << c << "]";
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-temperature coarsening on Z^2: simulation, exact oracle and statistical checks"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a registered experiment");
  std::string run_name, run_out;
  fs::path run_config;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_trials;
  int jobs = 1;
  run->add_option("experiment", run_name, "experiment name (see `list`)")->required();
  run->add_option("--config", run_config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "override the base seed");
  run->add_option("--trials", run_trials, "override the trial count");
  run->add_option("--jobs", jobs, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  run->add_option("--out", run_out, std::string("output directory (overrides ") + kOutputEnv + " and the config)");

  auto* oracle = app.add_subcommand("oracle", "exact hitting probability on a small box");
  fs::path oracle_query;
  std::size_t mc_trials = 0;
  std::uint64_t oracle_seed = 1;
  oracle->add_option("event-config", oracle_query, "oracle query (JSON)")->required()->check(CLI::ExistingFile);
  oracle->add_option("--mc-trials", mc_trials, "also run a Monte Carlo cross-check with this many trials");
  oracle->add_option("--seed", oracle_seed, "Monte Carlo base seed");
  oracle->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "record one trajectory to a binary dump");
  fs::path sim_spec, sim_out;
  std::uint64_t sim_seed = 1;
  double sim_horizon = 1.0;
  simulate->add_option("--spec", sim_spec, "process spec (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", sim_seed, "seed");
  simulate->add_option("--horizon", sim_horizon, "horizon")->required();
  simulate->add_option("--out", sim_out, "trajectory file")->required();

  auto* replay_cmd = app.add_subcommand("replay", "re-simulate a dumped trajectory and compare");
  fs::path replay_file;
  replay_cmd->add_option("trajectory-file", replay_file)->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "aggregate verdicts.json files below a directory");
  fs::path report_dir;
  report->add_option("dir", report_dir)->required()->check(CLI::ExistingDirectory);

  auto* margin = app.add_subcommand("margin", "smallest safe box half-width");
  double m_t = 1.0, m_eps = 1e-6;
  int m_l = 1;
  margin->add_option("--T", m_t, "horizon")->required();
  margin->add_option("--eps", m_eps, "influence budget")->required();
  margin->add_option("--L", m_l, "inner half-width")->required();

  auto* list = app.add_subcommand("list", "registered experiments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_name, run_config, run_seed, run_trials, jobs, run_out);
    if (oracle->parsed()) return cmd_oracle(oracle_query, mc_trials, oracle_seed, jobs);
    if (simulate->parsed()) return cmd_simulate(sim_spec, sim_seed, sim_horizon, sim_out);
    if (replay_cmd->parsed()) return cmd_replay(replay_file);
    if (report->parsed()) return cmd_report(report_dir);
    if (margin->parsed()) return cmd_margin(m_t, m_eps, m_l);
    if (list->parsed()) return cmd_list();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
