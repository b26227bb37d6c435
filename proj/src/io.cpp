// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/io.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "uavrelay/beamwidth.hpp"
#include "uavrelay/model.hpp"
#include "uavrelay/rng.hpp"

namespace uavrelay {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw std::invalid_argument("scenario field " + path + " must be a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer())
    throw std::invalid_argument("scenario field " + path + " must be an integer");
  return j.get<int>();
}

}  // namespace

ScenarioFile parse_scenario(const std::string& json_text) {
  ScenarioFile out;
  if (json_text.empty()) return out;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario parse error: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("scenario file must hold a JSON object");

  Scenario& c = out.base;
  for (const auto& [key, val] : j.items()) {
    if (key == "num_users") c.num_users = as_int(val, key);
    else if (key == "num_relays") c.num_relays = as_int(val, key);
    else if (key == "horizon_s") c.horizon_s = as_number(val, key);
    else if (key == "num_slots") c.num_slots = as_int(val, key);
    else if (key == "slot_s") c.slot_s = as_number(val, key);
    else if (key == "alt_mbs_m") c.alt_mbs_m = as_number(val, key);
    else if (key == "alt_relay_m") c.alt_relay_m = as_number(val, key);
    else if (key == "vmax_mbs") c.vmax_mbs = as_number(val, key);
    else if (key == "vmax_relay") c.vmax_relay = as_number(val, key);
    else if (key == "min_dist_m") c.min_dist_m = as_number(val, key);
    else if (key == "pathloss_exp") c.pathloss_exp = as_number(val, key);
    else if (key == "antenna_const") c.antenna_const = as_number(val, key);
    else if (key == "ref_gain_a2a_db") c.ref_gain_a2a = db_to_linear(as_number(val, key));
    else if (key == "ref_gain_a2g_db") c.ref_gain_a2g = db_to_linear(as_number(val, key));
    else if (key == "noise_dbm") c.noise_w = dbm_to_watt(as_number(val, key));
    else if (key == "p_avg_mbs_w") c.p_avg_mbs = as_number(val, key);
    else if (key == "p_avg_relay_w") c.p_avg_relay = as_number(val, key);
    else if (key == "p_max_mbs_w") c.p_max_mbs = as_number(val, key);
    else if (key == "p_max_relay_w") c.p_max_relay = as_number(val, key);
    else if (key == "beam_min") c.beam_min = as_number(val, key);
    else if (key == "beam_max") c.beam_max = as_number(val, key);
    else if (key == "delay_slots") c.delay_slots = as_int(val, key);
    else if (key == "battery_wslots") c.battery_wslots = as_number(val, key);
    else if (key == "area_m") out.area_m = as_number(val, key);
    else if (key == "propulsion") {
      if (!val.is_object()) throw std::invalid_argument("scenario field propulsion must be an object");
      for (const auto& [pk, pv] : val.items()) {
        const std::string path = "propulsion." + pk;
        if (pk == "blade_power_w") c.prop.blade_power_w = as_number(pv, path);
        else if (pk == "tip_speed_ms") c.prop.tip_speed_ms = as_number(pv, path);
        else if (pk == "fuselage_drag") c.prop.fuselage_drag = as_number(pv, path);
        else if (pk == "air_density") c.prop.air_density = as_number(pv, path);
        else if (pk == "rotor_solidity") c.prop.rotor_solidity = as_number(pv, path);
        else if (pk == "rotor_disc_area_m2") c.prop.rotor_disc_area_m2 = as_number(pv, path);
        else throw std::invalid_argument("unknown scenario field " + path);
      }
    } else if (key == "user_pos") {
      if (!val.is_array()) throw std::invalid_argument("scenario field user_pos must be an array");
      out.has_users = true;
      c.user_pos.resize(2, static_cast<Eigen::Index>(val.size()));
      Eigen::Index i = 0;
      for (const auto& pt : val) {
        if (!pt.is_array() || pt.size() != 2)
          throw std::invalid_argument("scenario field user_pos[" + std::to_string(i) +
                                      "] must be [x, y]");
        c.user_pos(0, i) = as_number(pt[0], "user_pos.x");
        c.user_pos(1, i) = as_number(pt[1], "user_pos.y");
        ++i;
      }
    } else {
      throw std::invalid_argument("unknown scenario field " + key);
    }
  }
  if (out.has_users) c.num_users = static_cast<int>(c.user_pos.cols());
  return out;
}

ScenarioFile load_scenario(const std::string& path) {
  if (path.empty()) return ScenarioFile{};
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioFile& file) {
  const Scenario& c = file.base;
  json j;
  j["num_users"] = c.num_users;
  j["num_relays"] = c.num_relays;
  j["horizon_s"] = c.horizon_s;
  j["num_slots"] = c.num_slots;
  j["slot_s"] = c.slot_s;
  j["alt_mbs_m"] = c.alt_mbs_m;
  j["alt_relay_m"] = c.alt_relay_m;
  j["vmax_mbs"] = c.vmax_mbs;
  j["vmax_relay"] = c.vmax_relay;
  j["min_dist_m"] = c.min_dist_m;
  j["pathloss_exp"] = c.pathloss_exp;
  j["antenna_const"] = c.antenna_const;
  j["ref_gain_a2a_db"] = linear_to_db(c.ref_gain_a2a);
  j["ref_gain_a2g_db"] = linear_to_db(c.ref_gain_a2g);
  j["noise_dbm"] = watt_to_dbm(c.noise_w);
  j["p_avg_mbs_w"] = c.p_avg_mbs;
  j["p_avg_relay_w"] = c.p_avg_relay;
  j["p_max_mbs_w"] = c.p_max_mbs;
  j["p_max_relay_w"] = c.p_max_relay;
  j["beam_min"] = c.beam_min;
  j["beam_max"] = c.beam_max;
  j["delay_slots"] = c.delay_slots;
  j["battery_wslots"] = c.battery_wslots;
  j["area_m"] = file.area_m;
  j["propulsion"] = {{"blade_power_w", c.prop.blade_power_w},
                     {"tip_speed_ms", c.prop.tip_speed_ms},
                     {"fuselage_drag", c.prop.fuselage_drag},
                     {"air_density", c.prop.air_density},
                     {"rotor_solidity", c.prop.rotor_solidity},
                     {"rotor_disc_area_m2", c.prop.rotor_disc_area_m2}};
  if (file.has_users) {
    json arr = json::array();
    for (Eigen::Index k = 0; k < c.user_pos.cols(); ++k)
      arr.push_back({c.user_pos(0, k), c.user_pos(1, k)});
    j["user_pos"] = arr;
  }
  return j.dump(2);
}

void save_scenario(const std::string& path, const ScenarioFile& file) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file " + path);
  out << scenario_to_json(file) << "\n";
}

Scenario finalize_scenario(const ScenarioFile& file, std::uint64_t seed) {
  Scenario cfg = file.base;
  if (!file.has_users) {
    Rng rng(seed);
    cfg.user_pos.resize(2, cfg.num_users);
    for (int k = 0; k < cfg.num_users; ++k) {
      cfg.user_pos(0, k) = rng.uniform(0.0, file.area_m);
      cfg.user_pos(1, k) = rng.uniform(0.0, file.area_m);
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string trajectories_csv(const Scenario& cfg, const NetworkState& s) {
  std::ostringstream os;
  os << "entity,slot,x_m,y_m,z_m\n";
  for (int n = 0; n < cfg.num_slots; ++n)
    os << "mbs," << n + 1 << "," << format_double(s.traj_mbs(0, n)) << ","
       << format_double(s.traj_mbs(1, n)) << "," << format_double(cfg.alt_mbs_m) << "\n";
  for (int m = 0; m < cfg.num_relays; ++m)
    for (int n = 0; n < cfg.num_slots; ++n)
      os << "relay" << m << "," << n + 1 << "," << format_double(s.traj_relay[m](0, n)) << ","
         << format_double(s.traj_relay[m](1, n)) << "," << format_double(cfg.alt_relay_m) << "\n";
  return os.str();
}

std::string schedule_csv(const Scenario& cfg, const Schedule& x) {
  std::ostringstream os;
  os << "slot,hop,tx,rx,value\n";
  for (int n = 0; n < cfg.num_slots; ++n) {
    for (int m = 0; m < cfg.num_relays; ++m)
      if (x.hop1(m, n) > 0.0)
        os << n + 1 << ",1,mbs,relay" << m << "," << format_double(x.hop1(m, n)) << "\n";
    for (int m = 0; m < cfg.num_relays; ++m)
      for (int k = 0; k < cfg.num_users; ++k)
        if (x.hop2[m](k, n) > 0.0)
          os << n + 1 << ",2,relay" << m << ",user" << k << ","
             << format_double(x.hop2[m](k, n)) << "\n";
  }
  return os.str();
}

std::string powers_csv(const Scenario& cfg, const NetworkState& s) {
  std::ostringstream os;
  os << "entity,slot,watts\n";
  for (int n = 0; n < cfg.num_slots; ++n)
    os << "mbs," << n + 1 << "," << format_double(s.power_mbs[n]) << "\n";
  for (int m = 0; m < cfg.num_relays; ++m)
    for (int n = 0; n < cfg.num_slots; ++n)
      os << "relay" << m << "," << n + 1 << "," << format_double(s.power_relay(m, n)) << "\n";
  return os.str();
}

std::string beamwidths_csv(const Scenario& cfg, const NetworkState& s) {
  std::ostringstream os;
  os << "entity,slot,r\n";
  for (int n = 0; n < cfg.num_slots; ++n)
    os << "mbs," << n + 1 << "," << format_double(s.beam_mbs[n]) << "\n";
  for (int m = 0; m < cfg.num_relays; ++m)
    for (int n = 0; n < cfg.num_slots; ++n)
      os << "relay" << m << "," << n + 1 << "," << format_double(s.beam_relay(m, n)) << "\n";
  return os.str();
}

std::string convergence_csv(const SolveSummary& summary) {
  std::ostringstream os;
  os << "outer,inner,block,mu,fairness,max_residual,wall_ms\n";
  for (const auto& row : summary.trace)
    os << row.outer << "," << row.inner << "," << row.block << "," << format_double(row.mu) << ","
       << format_double(row.fairness) << "," << format_double(row.max_residual) << ","
       << format_double(row.wall_ms) << "\n";
  return os.str();
}

}  // namespace

void write_run_artifacts(const Scenario& cfg, const SolveSummary& summary, std::uint64_t seed,
                         const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "trajectories.csv", trajectories_csv(cfg, summary.state));
  write_file(dir / "schedule.csv", schedule_csv(cfg, summary.binary_schedule));
  write_file(dir / "powers.csv", powers_csv(cfg, summary.state));
  write_file(dir / "beamwidths.csv", beamwidths_csv(cfg, summary.state));
  write_file(dir / "convergence.csv", convergence_csv(summary));

  json j;
  j["seed"] = seed;
  j["min_rate_bps_hz"] = summary.mu;
  j["min_rate_binary_bps_hz"] = summary.mu_binary;
  j["fairness"] = summary.fairness;
  j["reconstruction_gap"] = summary.reconstruction_gap;
  j["outer_iterations"] = summary.outer_iterations;
  j["status"] = convex::to_string(summary.status);
  j["runtime_ms"] = summary.wall_ms;
  json energy;
  energy["mbs"] = trajectory_energy(cfg, summary.state.traj_mbs);
  for (int m = 0; m < cfg.num_relays; ++m)
    energy["relay" + std::to_string(m)] = trajectory_energy(cfg, summary.state.traj_relay[m]);
  j["trajectory_energy_wslots"] = energy;
  json users = json::array();
  for (int k = 0; k < cfg.num_users; ++k)
    users.push_back({cfg.user_pos(0, k), cfg.user_pos(1, k)});
  j["user_pos"] = users;
  j["outer_mu"] = summary.outer_mu;
  write_file(dir / "summary.json", j.dump(2) + "\n");
}

int run_experiment(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
                   const RunFlags& flags) {
  try {
    ScenarioFile file = load_scenario(config_path);
    if (flags.relays) file.base.num_relays = *flags.relays;
    const Scenario cfg = finalize_scenario(file, seed);

    BcdOptions opts;
    if (flags.freeze_beamwidth) {
      opts.adapt_beams = false;
      opts.frozen_beam = *flags.freeze_beamwidth;
    }
    if (flags.tol) opts.rel_tol = *flags.tol;
    if (flags.max_outer) opts.max_outer = *flags.max_outer;

    const SolveSummary summary = algorithm3(cfg, opts);
    write_run_artifacts(cfg, summary, seed, out_dir);
    return summary.status == convex::Status::Optimal ? 0 : 2;
  } catch (const std::exception& e) {
    try {
      fs::create_directories(out_dir);
      json err;
      err["error"] = e.what();
      write_file(fs::path(out_dir) / "error.json", err.dump(2) + "\n");
    } catch (...) {
    }
    return 1;
  }
}

int sweep(const std::string& config_path, const std::string& param,
          const std::vector<double>& values, const std::vector<std::uint64_t>& seeds,
          const std::string& out_dir, const RunFlags& flags) {
  try {
    const ScenarioFile file = load_scenario(config_path);
    if (param != "T" && param != "D" && param != "P_UAV")
      throw std::invalid_argument("sweep parameter must be one of T, D, P_UAV");

    struct Point {
      double value;
      std::uint64_t seed;
      double mu = 0.0, fairness = 0.0;
      bool ok = false;
    };
    std::vector<Point> grid;
    for (double v : values)
      for (std::uint64_t s : seeds) grid.push_back({v, s});

    auto run_point = [&](Point pt) {
      ScenarioFile f = file;
      if (flags.relays) f.base.num_relays = *flags.relays;
      if (param == "T") {
        f.base.horizon_s = pt.value;
        f.base.num_slots = static_cast<int>(std::lround(pt.value / f.base.slot_s));
      } else if (param == "D") {
        f.base.delay_slots = static_cast<int>(std::lround(pt.value));
      } else {
        f.base.battery_wslots = pt.value;
      }
      BcdOptions opts;
      if (flags.freeze_beamwidth) {
        opts.adapt_beams = false;
        opts.frozen_beam = *flags.freeze_beamwidth;
      }
      if (flags.tol) opts.rel_tol = *flags.tol;
      if (flags.max_outer) opts.max_outer = *flags.max_outer;
      const Scenario cfg = finalize_scenario(f, pt.seed);
      const SolveSummary summary = algorithm3(cfg, opts);
      pt.mu = summary.mu;
      pt.fairness = summary.fairness;
      pt.ok = summary.status == convex::Status::Optimal;
      return pt;
    };

    // isolated pipelines; grid points run concurrently
    std::vector<std::future<Point>> futures;
    for (const Point& pt : grid)
      futures.push_back(std::async(std::launch::async, run_point, pt));
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = futures[i].get();

    fs::create_directories(out_dir);
    std::ostringstream os;
    os << "param,value,seed,mu,fairness\n";
    for (const Point& pt : grid)
      os << param << "," << format_double(pt.value) << "," << pt.seed << ","
         << format_double(pt.mu) << "," << format_double(pt.fairness) << "\n";
    write_file(fs::path(out_dir) / "sweep.csv", os.str());

    std::ostringstream agg;
    agg << "param,value,mean_mu,min_mu,max_mu,mean_fairness\n";
    for (double v : values) {
      double sum = 0.0, lo = 1e300, hi = -1e300, fsum = 0.0;
      int count = 0;
      for (const Point& pt : grid)
        if (pt.value == v) {
          sum += pt.mu;
          fsum += pt.fairness;
          lo = std::min(lo, pt.mu);
          hi = std::max(hi, pt.mu);
          ++count;
        }
      agg << param << "," << format_double(v) << "," << format_double(sum / count) << ","
          << format_double(lo) << "," << format_double(hi) << "," << format_double(fsum / count)
          << "\n";
    }
    write_file(fs::path(out_dir) / "sweep_summary.csv", agg.str());
    return 0;
  } catch (const std::exception& e) {
    try {
      fs::create_directories(out_dir);
      json err;
      err["error"] = e.what();
      write_file(fs::path(out_dir) / "error.json", err.dump(2) + "\n");
    } catch (...) {
    }
    return 1;
  }
}

int write_level_curves(const std::string& out_path, const std::vector<double>& gammas,
                       const std::vector<double>& levels, double theta_min_deg,
                       double theta_max_deg, double theta_step_deg) {
  try {
    std::vector<double> thetas;
    for (double t = theta_min_deg; t <= theta_max_deg + 1e-12; t += theta_step_deg)
      thetas.push_back(t);
    std::string all = "gamma,K,theta_deg,branch,r\n";
    for (double g : gammas) {
      const auto pts = level_curves(g, thetas, levels);
      std::string csv = level_curves_csv(pts);
      all += csv.substr(csv.find('\n') + 1);
    }
    write_file(out_path, all);
    return 0;
  } catch (const std::exception&) {
    return 1;
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

NetworkState state_from_artifacts(const Scenario& cfg, const std::string& out_dir) {
  NetworkState s = NetworkState::zeros(cfg);
  const fs::path dir(out_dir);
  auto entity_index = [&](const std::string& e) {
    if (e == "mbs") return -1;
    return std::stoi(e.substr(5));
  };
  for (const auto& row : read_csv((dir / "trajectories.csv").string()).rows) {
    const int idx = entity_index(row[0]);
    const int n = std::stoi(row[1]) - 1;
    const double x = std::stod(row[2]), y = std::stod(row[3]);
    if (idx < 0) {
      s.traj_mbs(0, n) = x;
      s.traj_mbs(1, n) = y;
    } else {
      s.traj_relay[idx](0, n) = x;
      s.traj_relay[idx](1, n) = y;
    }
  }
  for (const auto& row : read_csv((dir / "powers.csv").string()).rows) {
    const int idx = entity_index(row[0]);
    const int n = std::stoi(row[1]) - 1;
    if (idx < 0) s.power_mbs[n] = std::stod(row[2]);
    else s.power_relay(idx, n) = std::stod(row[2]);
  }
  for (const auto& row : read_csv((dir / "beamwidths.csv").string()).rows) {
    const int idx = entity_index(row[0]);
    const int n = std::stoi(row[1]) - 1;
    if (idx < 0) s.beam_mbs[n] = std::stod(row[2]);
    else s.beam_relay(idx, n) = std::stod(row[2]);
  }
  for (const auto& row : read_csv((dir / "schedule.csv").string()).rows) {
    const int n = std::stoi(row[0]) - 1;
    const int hop = std::stoi(row[1]);
    const double value = std::stod(row[4]);
    if (hop == 1) {
      s.sched_hop1(entity_index(row[3]), n) = value;  // rx names the relay
    } else {
      const int m = entity_index(row[2]);
      const int k = std::stoi(row[3].substr(4));
      s.sched_hop2[m](k, n) = value;
    }
  }
  return s;
}

}  // namespace uavrelay
