// SPDX-License-Identifier: Apache-2.0
//
// Feasible starting trajectories: MBS circular orbit around the user mass
// center, relay orbits derived from packing equal circles into the user disk,
// and a shared gamma scaling that meets the propulsion energy budget.

#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

#include "uavrelay/scenario.hpp"
#include "uavrelay/state.hpp"

namespace uavrelay {

struct HoverInfeasible : std::runtime_error {
  explicit HoverInfeasible(const std::string& msg) : std::runtime_error(msg) {}
};

Vec2 mass_center(const Mat2X& users);

/// Largest circle radius so that consecutive points of a uniformly sampled
/// circle with `points` samples stay within one slot of travel:
/// (v delta / 2) / sin(pi / points).
double max_orbit_radius(double vmax, double slot_s, int points);

/// Largest gamma in [0, 1] such that flying the gamma-scaled circle of the
/// given radius fits the battery: (N-1) moves at constant speed plus the
/// final hover slot. Throws HoverInfeasible when even hovering does not fit.
double gamma_max(const Scenario& cfg, double radius_m, double vmax);

/// Equal-circle packing of `count` circles inside the unit disk: known
/// optimal layouts up to five circles, a deterministic Lloyd relaxation
/// beyond that.
struct Packing {
  std::vector<Vec2> centers;  // in the unit disk
  double radius = 0.0;        // common circle radius
};
Packing unit_disk_packing(int count);

struct InitTrajectories {
  Mat2X traj_mbs;
  std::vector<Mat2X> traj_relay;
  double gamma = 0.0;
};

/// Circular orbits for every UAV: the MBS around the user mass center, each
/// relay around its packing centroid with radius min(R_max, r_cp / 2), all
/// scaled by the common energy-feasible gamma and phase-shifted so symmetric
/// layouts never start in collision.
InitTrajectories init_trajectories(const Scenario& cfg);

/// Full starting state: init trajectories, mid-range beams, zero powers and
/// an empty schedule.
NetworkState init_state(const Scenario& cfg);

}  // namespace uavrelay
