// SPDX-License-Identifier: Apache-2.0
//
// Beamwidth subproblem: sequential linear programming over the directivity
// exponents with fixed scheduling, trajectories and powers, plus a root
// analyzer for the stationarity level curves of the convex special case.

#pragma once

#include <Eigen/Core>

#include <vector>

#include "uavrelay/convex/program.hpp"
#include "uavrelay/scenario.hpp"
#include "uavrelay/state.hpp"

namespace uavrelay {

/// d(rate)/dr of R(r) = log2(1 + gamma' (r+1) cos^r(theta)):
///   gamma' cos^r ((r+1) ln cos + 1) / (ln2 (gamma' (r+1) cos^r + 1)).
double rate_grad_r(double gamma_prime, double cos_theta, double r);

/// Equivalent channel gamma' folding power and path loss but not the antenna
/// pattern, so that rate = log2(1 + gamma' (r+1) cos^r(theta)).
double gamma_prime_hop1(const Scenario& cfg, double p_w, const Vec2& q_mbs, const Vec2& q_relay);
double gamma_prime_hop2(const Scenario& cfg, double p_w, const Vec2& q_relay, const Vec2& user);

struct BeamOptions {
  double trust_init = 0.5;   // exponent units
  double rel_tol = 1e-4;
  int max_iterations = 30;
  double accept_tol = 1e-9;
};

/// O-R2: linearized rates around the state's exponents with a trust box of
/// half-width eps_trust intersected with [r_min, r_max].
convex::Program build_beam_lp(const Scenario& cfg, const NetworkState& state, double eps_trust);

struct SlpResult {
  Eigen::VectorXd beam_mbs;
  Eigen::MatrixXd beam_relay;
  double mu = 0.0;  // true objective at the returned exponents
  int iterations = 0;
  convex::Status status = convex::Status::Optimal;
};

/// Trust-managed SLP: solve O-R2, accept on the true objective, halve the
/// trust radius on rejection, stop on relative improvement below rel_tol.
SlpResult solve_beamwidths(const Scenario& cfg, const NetworkState& state,
                           const BeamOptions& opts = {});

/// Stationarity level-curve left-hand side
///   cos^r(theta) ((r+1) ln cos(theta) + 1) / ((r+1) cos^r(theta) + 1/gamma').
double level_curve_lhs(double gamma_prime, double theta_rad, double r);

struct LevelCurvePoint {
  double gamma_prime = 0.0;
  double level = 0.0;      // K
  double theta_deg = 0.0;
  int branch = 0;          // root index in increasing r, -1 when no root
  double r = 0.0;
};

/// All roots r in [0, 20] of level_curve_lhs = level, found by a sign-change
/// scan at step 0.05 refined by bisection to 1e-8. Grid points without roots
/// are recorded with branch = -1.
std::vector<LevelCurvePoint> level_curves(double gamma_prime,
                                          const std::vector<double>& theta_deg_grid,
                                          const std::vector<double>& levels);

/// CSV rows "gamma,K,theta_deg,branch,r" for the plotting pipeline.
std::string level_curves_csv(const std::vector<LevelCurvePoint>& points);

}  // namespace uavrelay
