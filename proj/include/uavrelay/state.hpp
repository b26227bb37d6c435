// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <vector>

#include "uavrelay/scenario.hpp"

namespace uavrelay {

/// The four optimization blocks at every time slot: scheduling X, trajectories
/// Q, beam exponents R, transmit powers P. Slot index n is 0-based in code and
/// maps to the 1-based slot n+1 of the formulation.
struct NetworkState {
  Eigen::MatrixXd sched_hop1;               // M x N, beta_{B,m}[n] in [0,1]
  std::vector<Eigen::MatrixXd> sched_hop2;  // per relay m: K x N, a_{m,k}[n] in [0,1]

  Mat2X traj_mbs;                // 2 x N, q_B[n] meters
  std::vector<Mat2X> traj_relay; // per relay m: 2 x N, q_m[n]

  Eigen::VectorXd beam_mbs;     // N, r_B[n]
  Eigen::MatrixXd beam_relay;   // M x N, r_m[n]

  Eigen::VectorXd power_mbs;    // N, p_B[n] watts
  Eigen::MatrixXd power_relay;  // M x N, p_m[n] watts

  static NetworkState zeros(const Scenario& cfg);
  void check_dims(const Scenario& cfg) const;  // throws std::invalid_argument
};

inline NetworkState NetworkState::zeros(const Scenario& cfg) {
  const int m = cfg.num_relays, k = cfg.num_users, n = cfg.num_slots;
  NetworkState s;
  s.sched_hop1 = Eigen::MatrixXd::Zero(m, n);
  s.sched_hop2.assign(m, Eigen::MatrixXd::Zero(k, n));
  s.traj_mbs = Mat2X::Zero(2, n);
  s.traj_relay.assign(m, Mat2X::Zero(2, n));
  s.beam_mbs = Eigen::VectorXd::Constant(n, cfg.beam_min);
  s.beam_relay = Eigen::MatrixXd::Constant(m, n, cfg.beam_min);
  s.power_mbs = Eigen::VectorXd::Zero(n);
  s.power_relay = Eigen::MatrixXd::Zero(m, n);
  return s;
}

inline void NetworkState::check_dims(const Scenario& cfg) const {
  const auto m = static_cast<Eigen::Index>(cfg.num_relays);
  const auto k = static_cast<Eigen::Index>(cfg.num_users);
  const auto n = static_cast<Eigen::Index>(cfg.num_slots);
  auto fail = [](const char* what) {
    throw std::invalid_argument(std::string("NetworkState: dimension mismatch in ") + what);
  };
  if (sched_hop1.rows() != m || sched_hop1.cols() != n) fail("sched_hop1");
  if (static_cast<Eigen::Index>(sched_hop2.size()) != m) fail("sched_hop2");
  for (const auto& a : sched_hop2)
    if (a.rows() != k || a.cols() != n) fail("sched_hop2");
  if (traj_mbs.cols() != n) fail("traj_mbs");
  if (static_cast<Eigen::Index>(traj_relay.size()) != m) fail("traj_relay");
  for (const auto& q : traj_relay)
    if (q.cols() != n) fail("traj_relay");
  if (beam_mbs.size() != n) fail("beam_mbs");
  if (beam_relay.rows() != m || beam_relay.cols() != n) fail("beam_relay");
  if (power_mbs.size() != n) fail("power_mbs");
  if (power_relay.rows() != m || power_relay.cols() != n) fail("power_relay");
}

}  // namespace uavrelay
