// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/model.hpp"

#include <algorithm>
#include <limits>

namespace uavrelay {

Eigen::VectorXd slot_speeds(const Scenario& cfg, const Mat2X& traj) {
  const Eigen::Index n = traj.cols();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    v[i] = (traj.col(i + 1) - traj.col(i)).norm() / cfg.slot_s;
  return v;
}

double trajectory_energy(const Scenario& cfg, const Mat2X& traj) {
  const Eigen::VectorXd v = slot_speeds(cfg, traj);
  double e = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) e += propulsion_power(cfg.prop, v[i]);
  return e;
}

Eigen::VectorXd user_rates(const Scenario& cfg, const NetworkState& state) {
  state.check_dims(cfg);
  const int n_slots = cfg.num_slots;
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(cfg.num_users);
  for (int n = cfg.delay_slots; n < n_slots; ++n) {
    for (int m = 0; m < cfg.num_relays; ++m) {
      for (int k = 0; k < cfg.num_users; ++k) {
        const double a = state.sched_hop2[m](k, n);
        if (a <= 0.0) continue;
        avg[k] += a * rate_hop2(cfg, state.power_relay(m, n), state.traj_relay[m].col(n),
                                cfg.user_pos.col(k), state.beam_relay(m, n));
      }
    }
  }
  return avg / static_cast<double>(n_slots);
}

double min_user_rate(const Scenario& cfg, const NetworkState& state) {
  return user_rates(cfg, state).minCoeff();
}

double ResidualReport::max_scaled() const {
  const Item* items[] = {&velocity, &closure,  &collision, &power_avg, &power_peak,
                         &beam,     &sched,    &causality, &energy};
  double worst = -std::numeric_limits<double>::infinity();
  for (const Item* it : items) worst = std::max(worst, it->scaled());
  return worst;
}

namespace {

void track(ResidualReport::Item& item, double raw, double scale) {
  if (raw > item.raw) {
    item.raw = raw;
    item.scale = scale;
  }
}

}  // namespace

ResidualReport constraint_residuals(const Scenario& cfg, const NetworkState& state) {
  state.check_dims(cfg);
  ResidualReport rep;
  const int n_slots = cfg.num_slots, n_relays = cfg.num_relays, n_users = cfg.num_users;
  const int delay = cfg.delay_slots;

  // Velocity (Eq. 1) and closure (Eq. 2) for every UAV.
  auto traj_terms = [&](const Mat2X& q, double vmax) {
    const double cap = vmax * cfg.slot_s * vmax * cfg.slot_s;
    for (Eigen::Index i = 0; i + 1 < q.cols(); ++i)
      track(rep.velocity, (q.col(i + 1) - q.col(i)).squaredNorm() - cap, cap);
    track(rep.closure, (q.col(0) - q.col(q.cols() - 1)).norm(), 1.0);
  };
  traj_terms(state.traj_mbs, cfg.vmax_mbs);
  for (const auto& q : state.traj_relay) traj_terms(q, cfg.vmax_relay);

  // Relay-pair collision (Eq. 3).
  const double dmin2 = cfg.min_dist_m * cfg.min_dist_m;
  if (n_relays < 2) {
    track(rep.collision, -dmin2, std::max(dmin2, 1.0));
  } else {
    for (int m = 0; m < n_relays; ++m)
      for (int j = m + 1; j < n_relays; ++j)
        for (int n = 0; n < n_slots; ++n)
          track(rep.collision,
                dmin2 - (state.traj_relay[m].col(n) - state.traj_relay[j].col(n)).squaredNorm(),
                std::max(dmin2, 1.0));
  }

  // Average and peak communication power (Eqs. 5-7), including nonnegativity.
  track(rep.power_avg, state.power_mbs.mean() - cfg.p_avg_mbs, cfg.p_avg_mbs);
  for (int m = 0; m < n_relays; ++m)
    track(rep.power_avg, state.power_relay.row(m).mean() - cfg.p_avg_relay, cfg.p_avg_relay);
  track(rep.power_peak, state.power_mbs.maxCoeff() - cfg.p_max_mbs, cfg.p_max_mbs);
  track(rep.power_peak, -state.power_mbs.minCoeff(), cfg.p_max_mbs);
  track(rep.power_peak, state.power_relay.maxCoeff() - cfg.p_max_relay, cfg.p_max_relay);
  track(rep.power_peak, -state.power_relay.minCoeff(), cfg.p_max_relay);

  // Beam exponent box (Eq. 12).
  track(rep.beam, state.beam_mbs.maxCoeff() - cfg.beam_max, 1.0);
  track(rep.beam, cfg.beam_min - state.beam_mbs.minCoeff(), 1.0);
  track(rep.beam, state.beam_relay.maxCoeff() - cfg.beam_max, 1.0);
  track(rep.beam, cfg.beam_min - state.beam_relay.minCoeff(), 1.0);

  // Scheduling sums (Eqs. 15-16) and [0,1] boxes.
  for (int n = 0; n < n_slots; ++n) {
    track(rep.sched, state.sched_hop1.col(n).sum() - 1.0, 1.0);
    for (int k = 0; k < n_users; ++k) {
      double sum_m = 0.0;
      for (int m = 0; m < n_relays; ++m) sum_m += state.sched_hop2[m](k, n);
      track(rep.sched, sum_m - 1.0, 1.0);
    }
    for (int m = 0; m < n_relays; ++m) track(rep.sched, state.sched_hop2[m].col(n).sum() - 1.0, 1.0);
  }
  track(rep.sched, -state.sched_hop1.minCoeff(), 1.0);
  track(rep.sched, state.sched_hop1.maxCoeff() - 1.0, 1.0);
  for (const auto& a : state.sched_hop2) {
    track(rep.sched, -a.minCoeff(), 1.0);
    track(rep.sched, a.maxCoeff() - 1.0, 1.0);
  }

  // Causality prefix sums (Eq. 17): a relay may forward only bits received
  // at least D slots earlier.
  for (int m = 0; m < n_relays; ++m) {
    double received = 0.0, sent = 0.0;
    double worst = -std::numeric_limits<double>::infinity();
    double worst_scale = 1.0;
    int recv_idx = 0;
    for (int n = delay; n < n_slots; ++n) {
      for (; recv_idx <= n - delay; ++recv_idx) {
        const double beta = state.sched_hop1(m, recv_idx);
        if (beta > 0.0)
          received += beta * rate_hop1(cfg, state.power_mbs[recv_idx], state.traj_mbs.col(recv_idx),
                                       state.traj_relay[m].col(recv_idx), state.beam_mbs[recv_idx]);
      }
      for (int k = 0; k < n_users; ++k) {
        const double a = state.sched_hop2[m](k, n);
        if (a > 0.0)
          sent += a * rate_hop2(cfg, state.power_relay(m, n), state.traj_relay[m].col(n),
                                cfg.user_pos.col(k), state.beam_relay(m, n));
      }
      const double scale = std::max(1.0, received);
      if ((sent - received) / scale > worst / worst_scale) {
        worst = sent - received;
        worst_scale = scale;
      }
    }
    track(rep.causality, worst, worst_scale);
  }

  // Trajectory energy budgets.
  track(rep.energy, trajectory_energy(cfg, state.traj_mbs) - cfg.battery_wslots, cfg.battery_wslots);
  for (const auto& q : state.traj_relay)
    track(rep.energy, trajectory_energy(cfg, q) - cfg.battery_wslots, cfg.battery_wslots);

  return rep;
}

}  // namespace uavrelay
