// SPDX-License-Identifier: Apache-2.0
//
// Scenario files, reproducible experiment runs, and CSV/JSON emission.
// All numeric output is locale-independent shortest-round-trip formatting,
// so a reseeded run reproduces its artifacts byte for byte.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uavrelay/orchestrator.hpp"
#include "uavrelay/scenario.hpp"

namespace uavrelay {

/// Scenario file contents: everything in Scenario except that user positions
/// may be left to a seeded draw inside an area_m x area_m square.
struct ScenarioFile {
  Scenario base;
  bool has_users = false;
  double area_m = 800.0;
};

/// Parse a scenario JSON file. An empty path yields the simulation defaults.
/// Unknown keys and invariant violations raise std::invalid_argument with the
/// offending field path.
ScenarioFile load_scenario(const std::string& path);
ScenarioFile parse_scenario(const std::string& json_text);
std::string scenario_to_json(const ScenarioFile& file);
void save_scenario(const std::string& path, const ScenarioFile& file);

/// Place users: the file's explicit positions when given, otherwise a seeded
/// uniform draw over the area.
Scenario finalize_scenario(const ScenarioFile& file, std::uint64_t seed);

struct RunFlags {
  std::optional<double> freeze_beamwidth;
  std::optional<int> relays;
  std::optional<double> tol;
  std::optional<int> max_outer;
};

/// Full experiment: solve, then write trajectories.csv, schedule.csv,
/// powers.csv, beamwidths.csv, convergence.csv and summary.json into out_dir.
/// Returns the process exit code; failures leave a machine-readable
/// error.json behind.
int run_experiment(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
                   const RunFlags& flags = {});

/// Parameter sweep over `values` x `seeds`; each grid point is an isolated
/// run (executed concurrently) recorded in sweep.csv, with per-value
/// mean/min/max aggregates in sweep_summary.csv. Supported parameters:
/// "T" (horizon, slot length fixed), "D" (processing delay) and
/// "P_UAV" (battery).
int sweep(const std::string& config_path, const std::string& param,
          const std::vector<double>& values, const std::vector<std::uint64_t>& seeds,
          const std::string& out_dir, const RunFlags& flags = {});

/// Level-curve table for the beam stationarity equation, written as
/// "gamma,K,theta_deg,branch,r".
int write_level_curves(const std::string& out_path, const std::vector<double>& gammas,
                       const std::vector<double>& levels, double theta_min_deg,
                       double theta_max_deg, double theta_step_deg);

// --- helpers shared with the test suites ---

std::string format_double(double v);  // shortest round-trip, locale-free

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

/// Rebuild a NetworkState from emitted artifacts (used by re-validation).
NetworkState state_from_artifacts(const Scenario& cfg, const std::string& out_dir);

void write_run_artifacts(const Scenario& cfg, const SolveSummary& summary, std::uint64_t seed,
                         const std::string& out_dir);

}  // namespace uavrelay
