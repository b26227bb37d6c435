// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: `run` solves one scenario and writes its artifact
// set, `sweep` grids a parameter over seeds, `level-curves` tabulates the
// beam stationarity branches.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "uavrelay/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"two-hop UAV relay network planner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  double freeze_beam = -1.0;
  int relays = -1;
  double tol = -1.0;
  int max_outer = -1;

  auto add_shared = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "scenario JSON file (defaults when omitted)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "seed for user placement");
    cmd->add_option("--freeze-beamwidth", freeze_beam,
                    "disable beam adaptation and hold the exponent at this value");
    cmd->add_option("--relays", relays, "override the relay count");
    cmd->add_option("--tol", tol, "relative convergence tolerance");
    cmd->add_option("--max-outer", max_outer, "outer iteration cap");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "solve one scenario");
  add_shared(run_cmd);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid a parameter over seeds");
  add_shared(sweep_cmd);
  std::string param = "T";
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  sweep_cmd->add_option("--param", param, "one of T, D, P_UAV")->required();
  sweep_cmd->add_option("--values", values, "grid values")->required();
  sweep_cmd->add_option("--seeds", seeds, "seed list (defaults to --seed)");

  CLI::App* level_cmd = app.add_subcommand("level-curves", "tabulate beam stationarity roots");
  std::string level_out = "level_curves.csv";
  std::vector<double> gammas = {10.0, 50.0};
  std::vector<double> levels = {0.02, 0.05, 0.08, 0.12, 0.2};
  double theta_min = 1.0, theta_max = 89.0, theta_step = 1.0;
  level_cmd->add_option("--out", level_out, "output CSV path");
  level_cmd->add_option("--gamma", gammas, "equivalent channel values");
  level_cmd->add_option("--levels", levels, "K values");
  level_cmd->add_option("--theta-min", theta_min, "first elevation, degrees");
  level_cmd->add_option("--theta-max", theta_max, "last elevation, degrees");
  level_cmd->add_option("--theta-step", theta_step, "grid step, degrees");

  CLI11_PARSE(app, argc, argv);

  uavrelay::RunFlags flags;
  if (freeze_beam >= 0.0) flags.freeze_beamwidth = freeze_beam;
  if (relays > 0) flags.relays = relays;
  if (tol > 0.0) flags.tol = tol;
  if (max_outer > 0) flags.max_outer = max_outer;

  if (run_cmd->parsed()) return uavrelay::run_experiment(config_path, seed, out_dir, flags);
  if (sweep_cmd->parsed()) {
    if (seeds.empty()) seeds.push_back(seed);
    return uavrelay::sweep(config_path, param, values, seeds, out_dir, flags);
  }
  if (level_cmd->parsed())
    return uavrelay::write_level_curves(level_out, gammas, levels, theta_min, theta_max,
                                        theta_step);
  std::cerr << "no subcommand\n";
  return 1;
}
