// SPDX-License-Identifier: Apache-2.0
//
// Block coordinate descent over the four variable blocks: the inner loop
// cycles scheduling, trajectories and beamwidths at fixed power; the outer
// loop alternates the inner loop with the power allocation. Every block step
// may only improve the worst user's average rate, which gives the monotone
// convergence the whole pipeline is certified against.

#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "uavrelay/beamwidth.hpp"
#include "uavrelay/power.hpp"
#include "uavrelay/scenario.hpp"
#include "uavrelay/scheduling.hpp"
#include "uavrelay/state.hpp"
#include "uavrelay/trajectory.hpp"

namespace uavrelay {

/// Jain's fairness index (sum r)^2 / (K sum r^2); 1 iff all rates equal.
/// Throws std::invalid_argument when every rate is zero.
double fairness_index(const Eigen::VectorXd& rates);

/// Upper bound on any achievable min average rate: the best conceivable slot
/// has the relay at peak power directly above its user with the narrowest
/// beam. The outer iteration trace must stay below this bound.
double mu_upper_bound(const Scenario& cfg);

struct BcdOptions {
  double rel_tol = 1e-4;
  int max_inner = 60;        // Algorithm-1 iterations per outer round
  int max_outer = 10;        // outer rounds
  bool adapt_beams = true;   // false freezes the exponents at frozen_beam
  double frozen_beam = 2.0;
  double eps_bin = 0.05;
  TrajOptions traj;
  BeamOptions beam;
  PowerOptions power;
};

struct TraceRow {
  int outer = 0;
  int inner = 0;
  std::string block;
  double mu = 0.0;
  double fairness = 0.0;
  double max_residual = 0.0;
  double wall_ms = 0.0;
};

struct InnerResult {
  NetworkState state;
  double mu = 0.0;
  int iterations = 0;
  convex::Status status = convex::Status::Optimal;
};

/// Algorithm 1: scheduling -> trajectories -> beamwidths at fixed power,
/// iterated until the relative improvement drops below rel_tol.
InnerResult algorithm1(const Scenario& cfg, const NetworkState& start, const BcdOptions& opts,
                       int outer_index, std::vector<TraceRow>* trace);

struct SolveSummary {
  NetworkState state;           // final relaxed operating point
  Schedule binary_schedule;     // reconstructed final schedule
  NetworkState binary_state;    // state with the binary schedule applied
  double mu = 0.0;              // min average rate of the relaxed solution
  double mu_binary = 0.0;
  double fairness = 0.0;
  bool reconstruction_gap = false;
  std::vector<double> outer_mu;
  std::vector<TraceRow> trace;
  int outer_iterations = 0;
  convex::Status status = convex::Status::Optimal;
  double wall_ms = 0.0;
};

/// Algorithm 3: feasible initialization, uniform starting powers, then the
/// outer alternation of Algorithm 1 and the power step; the final schedule is
/// reconstructed to binary afterwards.
SolveSummary algorithm3(const Scenario& cfg, const BcdOptions& opts = {});

}  // namespace uavrelay
