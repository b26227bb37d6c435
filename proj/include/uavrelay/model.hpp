// SPDX-License-Identifier: Apache-2.0
//
// Physical and communication model: channel gains, angle-dependent antenna
// gains, instantaneous rates, propulsion power, and constraint residuals.
// All functions are pure and reentrant.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "uavrelay/scenario.hpp"
#include "uavrelay/state.hpp"

namespace uavrelay {

/// Free-space LoS channel gain on the air-to-air hop.
/// h = A d0A^kappa / (||q_B - q_m||^2 + (H_B - H_R)^2)^(kappa/2)
inline double channel_gain_a2a(const Scenario& cfg, const Vec2& q_mbs, const Vec2& q_relay) {
  const double dh = cfg.alt_diff();
  const double d2 = (q_mbs - q_relay).squaredNorm() + dh * dh;
  return cfg.antenna_const * cfg.ref_gain_a2a * std::pow(d2, -0.5 * cfg.pathloss_exp);
}

/// Air-to-ground channel gain, relay altitude H_R above the user plane.
inline double channel_gain_a2g(const Scenario& cfg, const Vec2& q_relay, const Vec2& user) {
  const double d2 = (q_relay - user).squaredNorm() + cfg.alt_relay_m * cfg.alt_relay_m;
  return cfg.antenna_const * cfg.ref_gain_a2g * std::pow(d2, -0.5 * cfg.pathloss_exp);
}

/// Directional antenna gain G = D_0(r) cos^r(theta) with D_0(r) = 2(r+1).
/// cos_theta must be in (0, 1]; a destination at or above the transmitter's
/// horizon is geometrically impossible in this model.
inline double antenna_gain(double r, double cos_theta) {
  if (r < 1.0) throw std::invalid_argument("antenna_gain: directivity exponent must be >= 1");
  if (!(cos_theta > 0.0) || cos_theta > 1.0)
    throw std::invalid_argument("antenna_gain: cos_theta must be in (0, 1]");
  return 2.0 * (r + 1.0) * std::pow(cos_theta, r);
}

/// cos of the elevation angle between a transmitter dh above the receiver
/// plane and a receiver at horizontal distance sqrt(horiz2).
inline double cos_elevation(double horiz2, double dh) {
  return dh / std::sqrt(horiz2 + dh * dh);
}

/// Instantaneous hop-1 spectral efficiency, bps/Hz.
inline double rate_hop1(const Scenario& cfg, double p_w, const Vec2& q_mbs, const Vec2& q_relay,
                        double r_beam) {
  if (p_w <= 0.0) return 0.0;
  const double dh = std::abs(cfg.alt_diff());
  const double d2 = (q_mbs - q_relay).squaredNorm() + dh * dh;
  const double num = p_w * cfg.rho0_mbs() * (r_beam + 1.0) * std::pow(dh, r_beam);
  const double den = cfg.noise_w * std::pow(d2, 0.5 * (cfg.pathloss_exp + r_beam));
  return std::log2(1.0 + num / den);
}

/// Instantaneous hop-2 spectral efficiency, bps/Hz.
inline double rate_hop2(const Scenario& cfg, double p_w, const Vec2& q_relay, const Vec2& user,
                        double r_beam) {
  if (p_w <= 0.0) return 0.0;
  const double h = cfg.alt_relay_m;
  const double d2 = (q_relay - user).squaredNorm() + h * h;
  const double num = p_w * cfg.rho0_relay() * (r_beam + 1.0) * std::pow(h, r_beam);
  const double den = cfg.noise_w * std::pow(d2, 0.5 * (cfg.pathloss_exp + r_beam));
  return std::log2(1.0 + num / den);
}

/// Rotary-wing movement power at horizontal speed v (m/s):
/// P_0 (1 + 3 v^2 / U_tip^2) + (1/2) d_0 rho_a s B v^3.
inline double propulsion_power(const PropulsionParams& p, double speed) {
  if (speed < 0.0) throw std::invalid_argument("propulsion_power: speed must be nonnegative");
  const double blade = p.blade_power_w * (1.0 + 3.0 * speed * speed / (p.tip_speed_ms * p.tip_speed_ms));
  const double parasite = 0.5 * p.fuselage_drag * p.air_density * p.rotor_solidity *
                          p.rotor_disc_area_m2 * speed * speed * speed;
  return blade + parasite;
}

/// Per-slot speeds of a trajectory: v[n] = ||q[n+1] - q[n]|| / delta for
/// n < N; the last slot of a closed trajectory has no further move, v[N] = 0.
Eigen::VectorXd slot_speeds(const Scenario& cfg, const Mat2X& traj);

/// Sum over slots of propulsion power, watt-slots.
double trajectory_energy(const Scenario& cfg, const Mat2X& traj);

/// Per-user average rate Rbar_k = (1/N) sum_{n=D+1}^{N} sum_m a_{m,k}[n] R_{m,k}[n].
Eigen::VectorXd user_rates(const Scenario& cfg, const NetworkState& state);

/// min_k Rbar_k, the master objective.
double min_user_rate(const Scenario& cfg, const NetworkState& state);

/// Signed constraint violations of a full network state. Each family reports
/// the worst raw violation (positive = violated) together with its natural
/// scale; feasibility gates use the scaled value.
struct ResidualReport {
  struct Item {
    double raw = -std::numeric_limits<double>::infinity();  // signed, > 0 violated
    double scale = 1.0;
    double scaled() const { return raw / scale; }
  };
  Item velocity;    // max_n ||dq||^2 - (V delta)^2, scale (V delta)^2
  Item closure;     // max ||q[1] - q[N]||, meters
  Item collision;   // max_n d_min^2 - min-pair ||q_m - q_j||^2, scale d_min^2
  Item power_avg;   // max over UAVs of (1/N) sum p - P_avg, scale P_avg
  Item power_peak;  // max p - P_max (and -p below 0), scale P_max
  Item beam;        // max bound violation of r in [r_min, r_max]
  Item sched;       // max violation of the three scheduling sum rules and [0,1] boxes
  Item causality;   // max_m,n sent-prefix - received-prefix, scale max(1, received)
  Item energy;      // max over UAVs of sum_n P_C - P_UAV, scale P_UAV

  double max_scaled() const;
  bool feasible(double tol = 1e-6) const { return max_scaled() <= tol; }
};

ResidualReport constraint_residuals(const Scenario& cfg, const NetworkState& state);

}  // namespace uavrelay
