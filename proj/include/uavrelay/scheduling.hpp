// SPDX-License-Identifier: Apache-2.0
//
// TDMA scheduling subproblem: LP over the relaxed association variables with
// fixed trajectories, beamwidths and powers, plus reconstruction of a binary
// schedule from the relaxed solution.

#pragma once

#include <Eigen/Core>

#include <vector>

#include "uavrelay/convex/program.hpp"
#include "uavrelay/scenario.hpp"
#include "uavrelay/state.hpp"

namespace uavrelay {

/// Link rates with every non-scheduling block frozen: hop1(m, n) is the rate
/// the MBS achieves towards relay m at slot n, hop2[m](k, n) the rate relay m
/// achieves towards user k.
struct RateTables {
  Eigen::MatrixXd hop1;
  std::vector<Eigen::MatrixXd> hop2;
};

RateTables compute_rate_tables(const Scenario& cfg, const NetworkState& state);

struct Schedule {
  Eigen::MatrixXd hop1;                     // beta, M x N
  std::vector<Eigen::MatrixXd> hop2;        // a, per relay K x N

  static Schedule zeros(const Scenario& cfg);
  void store_into(NetworkState& state) const;
  static Schedule from_state(const NetworkState& state);
};

/// Relaxed O-X1: maximize mu subject to per-user average-rate floors, the
/// TDMA sum rules, causality with fixed rates, and 0 <= beta, a <= 1.
convex::Program build_sched_lp(const Scenario& cfg, const RateTables& rates);

struct ScheduleResult {
  Schedule schedule;
  double mu = 0.0;
  convex::Status status = convex::Status::NumericalFailure;
};

ScheduleResult solve_schedule(const Scenario& cfg, const RateTables& rates);

/// Average rate of the worst user under a schedule with fixed rate tables.
double schedule_min_rate(const Scenario& cfg, const Schedule& x, const RateTables& rates);

/// Worst causality violation of a schedule (positive = infeasible).
double schedule_causality_violation(const Scenario& cfg, const Schedule& x,
                                    const RateTables& rates);

struct BinarizeResult {
  Schedule schedule;
  double mu = 0.0;
  bool reconstruction_gap = false;  // binary mu fell below (1 - eps) * relaxed mu
};

/// Slot-wise rounding to the largest fractional weight, a greedy causality
/// repair pass, then local reassignment sweeps while the worst user improves.
BinarizeResult binarize_schedule(const Scenario& cfg, const Schedule& relaxed,
                                 const RateTables& rates, double eps_bin = 0.05);

}  // namespace uavrelay
