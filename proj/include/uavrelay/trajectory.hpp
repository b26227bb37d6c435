// SPDX-License-Identifier: Apache-2.0
//
// Trajectory subproblem: sequential convex programming on the UAV positions
// with fixed scheduling, beamwidths and powers. Rates are replaced by their
// first-order Taylor lower bounds in the squared link distance; collision
// avoidance is linearized around the expansion point.

#pragma once

#include <Eigen/Core>

#include <vector>

#include "uavrelay/convex/program.hpp"
#include "uavrelay/scenario.hpp"
#include "uavrelay/state.hpp"

namespace uavrelay {

/// Expansion-point data for one SCP iteration. For hop 1, the bound is
///   R >= -lin_hop1 * (||q_B - q_m||^2 - dist2_hop1) + rate_hop1
/// and analogously for hop 2 against the user positions.
struct ScpExpansion {
  Mat2X q_mbs;
  std::vector<Mat2X> q_relay;

  Eigen::MatrixXd snr_hop1;    // Gamma_{B,m}[n], power-folded SNR numerator
  Eigen::MatrixXd lin_hop1;    // A^p >= 0
  Eigen::MatrixXd rate_hop1;   // B^p, true rate at the expansion point
  Eigen::MatrixXd dist2_hop1;  // squared 3-D link distance at the expansion

  std::vector<Eigen::MatrixXd> snr_hop2;    // per relay: K x N
  std::vector<Eigen::MatrixXd> lin_hop2;    // C^p
  std::vector<Eigen::MatrixXd> rate_hop2;   // D^p
  std::vector<Eigen::MatrixXd> dist2_hop2;
};

/// Coefficients of the Taylor lower bounds at the state's trajectories.
/// Zero-power links get zero coefficients, making the bound identically 0.
ScpExpansion compute_expansion(const Scenario& cfg, const NetworkState& state);

/// Lower bound value R^lb at squared distance d2 given the coefficients.
inline double scp_rate_bound(double lin, double rate_at_p, double dist2_at_p, double d2) {
  return rate_at_p - lin * (d2 - dist2_at_p);
}

struct TrajOptions {
  double accept_tol = 1e-9;     // allowed true-objective decrease per step
  double rel_tol = 1e-4;        // SCP stopping tolerance on mu_lb
  int max_iterations = 30;
  double min_damping = 1.0 / 16.0;
  double arena_margin_m = 1200.0;  // position box inflation around the users
  double trust_radius_m = 0.0;     // >0 boxes positions around the expansion point
};

/// Convex program O-T3 at the given expansion. Velocity, closure (by variable
/// aliasing), linearized collision, rate slacks and the propulsion-energy
/// epigraph are all certified-convex constraints.
convex::Program build_traj_program(const Scenario& cfg, const NetworkState& state,
                                   const ScpExpansion& exp, const TrajOptions& opts = {});

struct ScpStepResult {
  Mat2X q_mbs;
  std::vector<Mat2X> q_relay;
  double mu_lb = 0.0;     // O-T3 objective (lower bound on the true objective)
  double mu_true = 0.0;   // true min average rate at the accepted point
  bool accepted = false;
  convex::Status status = convex::Status::NumericalFailure;
};

/// One damped SCP step from the state's trajectories: solve O-T3, move by
/// eta towards its solution, accept if the true objective does not decrease
/// and the true constraints stay feasible.
ScpStepResult scp_step(const Scenario& cfg, const NetworkState& state, double eta,
                       const TrajOptions& opts = {});

struct TrajResult {
  Mat2X q_mbs;
  std::vector<Mat2X> q_relay;
  double mu = 0.0;  // true objective at the returned trajectories
  int iterations = 0;
  convex::Status status = convex::Status::Optimal;
};

/// Full SCP loop with geometric damping: eta halves on rejection down to
/// min_damping, resets on acceptance; stops on relative improvement below
/// rel_tol or the iteration cap.
TrajResult solve_trajectories(const Scenario& cfg, const NetworkState& state,
                              const TrajOptions& opts = {});

}  // namespace uavrelay
