// SPDX-License-Identifier: Apache-2.0
//
// Scenario description for the two-hop UAV relay planner: physical and
// communication parameters, ground-user layout, and mission horizon.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace uavrelay {

using Vec2 = Eigen::Vector2d;
using Mat2X = Eigen::Matrix2Xd;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

/// Rotary-wing propulsion model coefficients. Defaults are the usual
/// rotary-wing literature values; every field is overridable from config.
struct PropulsionParams {
  double blade_power_w = 79.86;       // P_0, blade-profile power in hover
  double tip_speed_ms = 120.0;        // U_tip
  double fuselage_drag = 0.6;         // d_0
  double air_density = 1.225;         // rho_a, kg/m^3
  double rotor_solidity = 0.05;       // s
  double rotor_disc_area_m2 = 0.503;  // B
};

/// Immutable scenario parameters. All gains are stored in linear units;
/// config files accept dB and are converted on load.
struct Scenario {
  int num_users = 7;    // K
  Mat2X user_pos;       // 2 x K, meters
  int num_relays = 2;   // M

  double horizon_s = 40.0;  // T
  int num_slots = 40;       // N
  double slot_s = 1.0;      // delta = T / N

  double alt_mbs_m = 200.0;    // H_B
  double alt_relay_m = 100.0;  // H_R

  double vmax_mbs = 50.0;    // V_B, m/s
  double vmax_relay = 50.0;  // V_R, m/s
  double min_dist_m = 10.0;  // d_min, relay separation

  double pathloss_exp = 2.0;                     // kappa >= 1
  double antenna_const = 1.0;                    // A
  double ref_gain_a2a = db_to_linear(-35.0);     // d0A^kappa, linear
  double ref_gain_a2g = db_to_linear(-50.0);     // d0G^kappa, linear
  double noise_w = dbm_to_watt(-100.0);          // sigma^2

  double p_avg_mbs = 2e-3;    // P_{B,avg}, W
  double p_avg_relay = 2e-3;  // P_{R,avg}, W
  double p_max_mbs = 4e-3;    // P_{B,max}, W
  double p_max_relay = 4e-3;  // P_{R,max}, W

  double beam_min = 1.0;  // r_min
  double beam_max = 6.0;  // r_max

  int delay_slots = 1;            // D, processing delay
  double battery_wslots = 6500.0; // P_UAV, watt-slots summed over the horizon

  PropulsionParams prop;

  // rho_{0,B} = 2 A d0A^kappa and rho_{0,m} = 2 A d0G^kappa
  double rho0_mbs() const { return 2.0 * antenna_const * ref_gain_a2a; }
  double rho0_relay() const { return 2.0 * antenna_const * ref_gain_a2g; }
  double alt_diff() const { return alt_mbs_m - alt_relay_m; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

inline void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("Scenario: " + msg); };
  if (num_users < 1) fail("num_users must be positive");
  if (num_relays < 1) fail("num_relays must be positive");
  if (user_pos.cols() != num_users) fail("user_pos count does not match num_users");
  if (num_slots < 2) fail("num_slots must be at least 2");
  if (!(horizon_s > 0.0)) fail("horizon_s must be positive");
  if (std::abs(slot_s * num_slots - horizon_s) > 1e-9 * horizon_s)
    fail("slot_s * num_slots must equal horizon_s");
  if (!(alt_mbs_m > alt_relay_m) || !(alt_relay_m > 0.0))
    fail("altitudes must satisfy H_B > H_R > 0");
  if (!(vmax_mbs > 0.0) || !(vmax_relay > 0.0)) fail("max velocities must be positive");
  if (min_dist_m < 0.0) fail("min_dist_m must be nonnegative");
  if (pathloss_exp < 1.0) fail("pathloss_exp must be >= 1");
  if (!(antenna_const > 0.0)) fail("antenna_const must be positive");
  if (!(ref_gain_a2a > 0.0) || !(ref_gain_a2g > 0.0)) fail("reference gains must be positive");
  if (!(noise_w > 0.0)) fail("noise_w must be positive");
  if (p_avg_mbs < 0.0 || p_avg_relay < 0.0) fail("average powers must be nonnegative");
  if (p_max_mbs < p_avg_mbs) fail("p_max_mbs must be >= p_avg_mbs");
  if (p_max_relay < p_avg_relay) fail("p_max_relay must be >= p_avg_relay");
  if (beam_min < 1.0) fail("beam_min must be >= 1");
  if (beam_max < beam_min) fail("beam_max must be >= beam_min");
  if (delay_slots < 0) fail("delay_slots must be nonnegative");
  if (delay_slots >= num_slots) fail("delay_slots must be smaller than num_slots");
  if (!(battery_wslots > 0.0)) fail("battery_wslots must be positive");
  if (!(prop.blade_power_w > 0.0) || !(prop.tip_speed_ms > 0.0))
    fail("propulsion parameters must be positive");
}

}  // namespace uavrelay
