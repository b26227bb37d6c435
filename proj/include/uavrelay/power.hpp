// SPDX-License-Identifier: Apache-2.0
//
// Power allocation with fixed scheduling, trajectories and beamwidths.
// Both hops admit closed-form water-filling solutions parameterized by
// Lagrange multipliers; the multipliers come from cutting-plane dual ascent,
// and the two-hop coupling is resolved by sharing the causality multipliers
// between the relay and MBS subproblems.

#pragma once

#include <Eigen/Core>

#include <vector>

#include "uavrelay/convex/program.hpp"
#include "uavrelay/scenario.hpp"
#include "uavrelay/scheduling.hpp"
#include "uavrelay/state.hpp"

namespace uavrelay {

/// Per-link SNR-per-watt coefficients so that rate = log2(1 + p * gamma).
struct EquivalentChannels {
  Eigen::MatrixXd hop1;               // M x N
  std::vector<Eigen::MatrixXd> hop2;  // per relay: K x N
};

EquivalentChannels equivalent_channels(const Scenario& cfg, const NetworkState& state);

/// Multipliers of the power dual and their derived aggregates.
struct DualState {
  Eigen::VectorXd lambda_user;  // lambda_k >= 0, sums to 1 at an optimum
  Eigen::MatrixXd lambda_caus;  // lambda_{n,m} >= 0, stored M x N (cols < D zero)
  Eigen::VectorXd lambda_avg;   // average-power multiplier per relay
  Eigen::MatrixXd lambda_peak;  // peak-power multiplier per (relay, slot)

  /// x = 1 - sum_k lambda_k; zero at a bounded optimum.
  double x() const { return 1.0 - lambda_user.sum(); }
  /// w_{m,k}[n] = lambda_k - sum_{i=n}^{N-1} lambda_{i,m}
  double w(int m, int k, int n) const;
  /// z_m[n] = sum_{i=n+D}^{N-1} lambda_{i,m}
  double z(int m, int n, int delay) const;
};

/// Eq.-(24)-style primal map: zero before the first deliverable slot, then
/// clamp([zeta - 1/gamma_{m,k(n)}]^+, 0, P_R,max) towards the scheduled user.
Eigen::MatrixXd relay_power_wf(const Scenario& cfg, const Schedule& x,
                               const EquivalentChannels& ch, double zeta);

/// Eq.-(26)-style primal map: clamp([xi - 1/gamma_{B,m(n)}]^+, 0, P_B,max) on
/// the first N-D slots, zero afterwards.
Eigen::VectorXd mbs_power_wf(const Scenario& cfg, const Schedule& x,
                             const EquivalentChannels& ch, double xi);

struct RelayPowerResult {
  Eigen::MatrixXd power;                  // M x N
  std::vector<Eigen::MatrixXd> bits;      // delivered t_{m,k}[n] per relay, K x N
  double mu = 0.0;                        // min_k average delivered rate
  DualState duals;
  double kkt_residual = 0.0;
  convex::Status status = convex::Status::Optimal;
};

/// O-P2.1: relay powers with hop-1 rates frozen. Dual cutting planes over
/// (lambda_k, lambda_{n,m}) with the water-filling inner solutions; the
/// returned bits are capped by the available hop-1 prefix budget, so the
/// result is always feasible.
RelayPowerResult solve_relay_power(const Scenario& cfg, const Schedule& x,
                                   const EquivalentChannels& ch,
                                   const Eigen::MatrixXd& hop1_rates);

struct MbsPowerResult {
  Eigen::VectorXd power;  // N
  convex::Status status = convex::Status::Optimal;
  std::string witness;    // infeasible prefix description
};

/// O-P2.2: minimum total MBS power delivering at least the demanded prefix
/// bits per relay. Infeasible when even peak power on every slot cannot meet
/// a prefix, or when the average budget binds below the demand.
MbsPowerResult solve_mbs_power(const Scenario& cfg, const Schedule& x,
                               const EquivalentChannels& ch,
                               const Eigen::MatrixXd& demand_prefix);

struct PowerOptions {
  double rel_tol = 1e-4;
  int max_iterations = 20;  // outer alternation rounds
  int dual_cut_budget = 900;
};

struct PowerResult {
  Eigen::VectorXd power_mbs;
  Eigen::MatrixXd power_relay;
  double mu = 0.0;
  std::vector<double> trace;  // accepted mu per alternation round
  int iterations = 0;
  convex::Status status = convex::Status::Optimal;
};

/// Alternation of solve_relay_power / solve_mbs_power coordinated through the
/// shared causality multipliers, which makes the pair a dual decomposition of
/// the joint power problem rather than a one-way hand-off.
PowerResult optimize_powers(const Scenario& cfg, const NetworkState& state,
                            const PowerOptions& opts = {});

}  // namespace uavrelay
