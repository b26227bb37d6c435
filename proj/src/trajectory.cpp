// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/trajectory.hpp"

#include <cmath>

#include "uavrelay/model.hpp"

namespace uavrelay {

namespace {

constexpr double kLog2e = 1.4426950408889634;
constexpr double kSchedEps = 1e-9;  // scheduling weights below this are treated as off

}  // namespace

ScpExpansion compute_expansion(const Scenario& cfg, const NetworkState& state) {
  state.check_dims(cfg);
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots;
  const double dh = cfg.alt_diff();
  const double kappa = cfg.pathloss_exp;

  ScpExpansion e;
  e.q_mbs = state.traj_mbs;
  e.q_relay = state.traj_relay;
  e.snr_hop1.setZero(M, N);
  e.lin_hop1.setZero(M, N);
  e.rate_hop1.setZero(M, N);
  e.dist2_hop1.setZero(M, N);
  e.snr_hop2.assign(M, Eigen::MatrixXd::Zero(K, N));
  e.lin_hop2.assign(M, Eigen::MatrixXd::Zero(K, N));
  e.rate_hop2.assign(M, Eigen::MatrixXd::Zero(K, N));
  e.dist2_hop2.assign(M, Eigen::MatrixXd::Zero(K, N));

  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      {
        const double r = state.beam_mbs[n];
        const double gamma =
            state.power_mbs[n] * cfg.rho0_mbs() * (r + 1.0) * std::pow(std::abs(dh), r) / cfg.noise_w;
        const double d2 = (state.traj_mbs.col(n) - state.traj_relay[m].col(n)).squaredNorm() + dh * dh;
        e.snr_hop1(m, n) = gamma;
        e.dist2_hop1(m, n) = d2;
        if (gamma > 0.0) {
          const double expo = 0.5 * (kappa + r);
          e.lin_hop1(m, n) = expo * kLog2e / d2 / (1.0 + std::pow(d2, expo) / gamma);
          e.rate_hop1(m, n) = std::log2(1.0 + gamma / std::pow(d2, expo));
        }
      }
      for (int k = 0; k < K; ++k) {
        const double r = state.beam_relay(m, n);
        const double gamma = state.power_relay(m, n) * cfg.rho0_relay() * (r + 1.0) *
                             std::pow(cfg.alt_relay_m, r) / cfg.noise_w;
        const double d2 = (state.traj_relay[m].col(n) - cfg.user_pos.col(k)).squaredNorm() +
                          cfg.alt_relay_m * cfg.alt_relay_m;
        e.snr_hop2[m](k, n) = gamma;
        e.dist2_hop2[m](k, n) = d2;
        if (gamma > 0.0) {
          const double expo = 0.5 * (kappa + r);
          e.lin_hop2[m](k, n) = expo * kLog2e / d2 / (1.0 + std::pow(d2, expo) / gamma);
          e.rate_hop2[m](k, n) = std::log2(1.0 + gamma / std::pow(d2, expo));
        }
      }
    }
  }
  return e;
}

namespace {

// Variable layout of O-T3. Closure is handled by aliasing slot N-1 to slot 0,
// so每 trajectory has N-1 free positions.
struct TrajVars {
  int n_slots, n_relays;
  int n_free;  // N - 1

  int mu = 0;
  int qx(int uav, int n) const {  // uav 0 = MBS, 1..M = relays
    const int slot = n % n_free;
    return 1 + (uav * n_free + slot) * 2;
  }
  int qy(int uav, int n) const { return qx(uav, n) + 1; }
  int base_after_q() const { return 1 + (n_relays + 1) * n_free * 2; }
};

}  // namespace

convex::Program build_traj_program(const Scenario& cfg, const NetworkState& state,
                                   const ScpExpansion& exp, const TrajOptions& opts) {
  using convex::Terms;
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  const double delta = cfg.slot_s;
  TrajVars v{N, M, N - 1, 0};

  // arena box around the users
  const double lo_x = cfg.user_pos.row(0).minCoeff() - opts.arena_margin_m;
  const double hi_x = cfg.user_pos.row(0).maxCoeff() + opts.arena_margin_m;
  const double lo_y = cfg.user_pos.row(1).minCoeff() - opts.arena_margin_m;
  const double hi_y = cfg.user_pos.row(1).maxCoeff() + opts.arena_margin_m;

  const double mu_cap =
      std::log2(1.0 + cfg.p_max_relay * cfg.rho0_relay() * (cfg.beam_max + 1.0) /
                          (cfg.noise_w * std::pow(cfg.alt_relay_m, cfg.pathloss_exp)));
  const double d_cap = mu_cap + 1.0;

  convex::Program p;
  // the lower bound sits a hair below zero: an unserved user pins mu to 0,
  // which would otherwise leave the feasible set without an interior
  p.add_var("mu", -1e-6 * mu_cap, mu_cap);
  p.objective[v.mu] = 1.0;
  for (int u = 0; u <= M; ++u)
    for (int n = 0; n < v.n_free; ++n) {
      const Vec2 qp = u == 0 ? exp.q_mbs.col(n) : exp.q_relay[u - 1].col(n);
      double blx = lo_x, bhx = hi_x, bly = lo_y, bhy = hi_y;
      if (opts.trust_radius_m > 0.0) {
        blx = std::max(blx, qp.x() - opts.trust_radius_m);
        bhx = std::min(bhx, qp.x() + opts.trust_radius_m);
        bly = std::max(bly, qp.y() - opts.trust_radius_m);
        bhy = std::min(bhy, qp.y() + opts.trust_radius_m);
      }
      p.add_var("q" + std::to_string(u) + "x[" + std::to_string(n) + "]", blx, bhx, 100.0);
      p.add_var("q" + std::to_string(u) + "y[" + std::to_string(n) + "]", bly, bhy, 100.0);
    }

  // rate slacks d for scheduled hop-2 links
  std::vector<std::vector<std::vector<int>>> dvar(
      M, std::vector<std::vector<int>>(K, std::vector<int>(N, -1)));
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      for (int n = D; n < N; ++n)
        if (state.sched_hop2[m](k, n) > kSchedEps)
          dvar[m][k][n] = p.add_var("d[" + std::to_string(m) + "][" + std::to_string(k) + "][" +
                                        std::to_string(n) + "]",
                                    -d_cap, d_cap);

  // propulsion epigraph slacks per UAV move: w >= ||dq||^2, s >= ||dq||^3
  const double vmax_any = std::max(cfg.vmax_mbs, cfg.vmax_relay);
  const double move_cap = vmax_any * delta;
  std::vector<std::vector<int>> wvar(M + 1, std::vector<int>(v.n_free)),
      svar(M + 1, std::vector<int>(v.n_free));
  for (int u = 0; u <= M; ++u)
    for (int n = 0; n < v.n_free; ++n) {
      wvar[u][n] = p.add_var("w" + std::to_string(u) + "[" + std::to_string(n) + "]", 0.0,
                             move_cap * move_cap, 1e4);
      svar[u][n] = p.add_var("s" + std::to_string(u) + "[" + std::to_string(n) + "]", 0.0,
                             move_cap * move_cap * move_cap, 1e6);
    }

  // min-rate rows: mu <= (1/N) sum a d
  for (int k = 0; k < K; ++k) {
    Terms t{{v.mu, 1.0}};
    for (int m = 0; m < M; ++m)
      for (int n = D; n < N; ++n)
        if (dvar[m][k][n] >= 0)
          t.push_back({dvar[m][k][n], -state.sched_hop2[m](k, n) / N});
    p.linear.push_back({std::move(t), 0.0, "minrate[k=" + std::to_string(k) + "]"});
  }

  // causality with hop-1 lower bounds:
  //   sum_i beta A ||q_B - q_m||^2 + sum a d <= sum_i beta (B + A dist2^p)
  for (int m = 0; m < M; ++m) {
    for (int n = D; n < N; ++n) {
      convex::QuadCon qc;
      double rhs = 0.0;
      for (int i = 0; i <= n - D; ++i) {
        const double beta = state.sched_hop1(m, i);
        if (beta <= kSchedEps) continue;
        const double coef = beta * exp.lin_hop1(m, i);
        rhs += beta * (exp.rate_hop1(m, i) + exp.lin_hop1(m, i) * exp.dist2_hop1(m, i));
        if (coef <= 0.0) continue;
        const double root = std::sqrt(coef);
        qc.rows.push_back({{v.qx(0, i), root}, {v.qx(m + 1, i), -root}});
        qc.offs.push_back(0.0);
        qc.rows.push_back({{v.qy(0, i), root}, {v.qy(m + 1, i), -root}});
        qc.offs.push_back(0.0);
        // the altitude offset inside dist2 is constant: fold into rhs
        rhs -= coef * cfg.alt_diff() * cfg.alt_diff();
      }
      for (int i = D; i <= n; ++i)
        for (int k = 0; k < K; ++k)
          if (dvar[m][k][i] >= 0)
            qc.lin.push_back({dvar[m][k][i], -state.sched_hop2[m](k, i)});
      qc.rhs = rhs;
      qc.tag = "causality[m=" + std::to_string(m) + ",n=" + std::to_string(n) + "]";
      p.quad.push_back(std::move(qc));
    }
  }

  // d <= R^lb: C ||q_m - w_k||^2 + d <= D^p + C (dist2^p - H^2)
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      for (int n = D; n < N; ++n) {
        const int dv = dvar[m][k][n];
        if (dv < 0) continue;
        const double c = exp.lin_hop2[m](k, n);
        if (c <= 0.0) {  // zero-power link: bound is identically zero
          p.linear.push_back({{{dv, 1.0}}, 0.0, "rate0"});
          continue;
        }
        convex::QuadCon qc;
        const double root = std::sqrt(c);
        qc.rows.push_back({{v.qx(m + 1, n), root}});
        qc.offs.push_back(-root * cfg.user_pos(0, k));
        qc.rows.push_back({{v.qy(m + 1, n), root}});
        qc.offs.push_back(-root * cfg.user_pos(1, k));
        qc.lin = {{dv, -1.0}};
        qc.rhs = exp.rate_hop2[m](k, n) +
                 c * (exp.dist2_hop2[m](k, n) - cfg.alt_relay_m * cfg.alt_relay_m);
        qc.tag = "rate[m=" + std::to_string(m) + ",k=" + std::to_string(k) + ",n=" +
                 std::to_string(n) + "]";
        p.quad.push_back(std::move(qc));
      }

  // velocity and propulsion epigraphs for every move
  for (int u = 0; u <= M; ++u) {
    const double vmax = (u == 0 ? cfg.vmax_mbs : cfg.vmax_relay) * delta;
    for (int n = 0; n < v.n_free; ++n) {
      const int nn = (n + 1) % v.n_free;  // move n -> n+1 with closure wrap
      convex::QuadCon vel;
      vel.rows.push_back({{v.qx(u, nn), 1.0}, {v.qx(u, n), -1.0}});
      vel.offs.push_back(0.0);
      vel.rows.push_back({{v.qy(u, nn), 1.0}, {v.qy(u, n), -1.0}});
      vel.offs.push_back(0.0);
      vel.rhs = vmax * vmax;
      vel.tag = "velocity[u=" + std::to_string(u) + ",n=" + std::to_string(n) + "]";

      convex::QuadCon wep = vel;
      wep.rhs = 0.0;
      wep.lin = {{wvar[u][n], 1.0}};
      wep.tag = "speed2[u=" + std::to_string(u) + ",n=" + std::to_string(n) + "]";

      convex::NormCubeCon sep;
      sep.rows = vel.rows;
      sep.offs = vel.offs;
      sep.lin = {{svar[u][n], 1.0}};
      sep.rhs = 0.0;
      sep.tag = "speed3[u=" + std::to_string(u) + ",n=" + std::to_string(n) + "]";

      p.quad.push_back(std::move(vel));
      p.quad.push_back(std::move(wep));
      p.cube.push_back(std::move(sep));
    }
  }

  // energy budget per UAV
  const double cube_coef = 0.5 * cfg.prop.fuselage_drag * cfg.prop.air_density *
                           cfg.prop.rotor_solidity * cfg.prop.rotor_disc_area_m2 /
                           (delta * delta * delta);
  const double quad_coef =
      3.0 * cfg.prop.blade_power_w / (cfg.prop.tip_speed_ms * cfg.prop.tip_speed_ms * delta * delta);
  for (int u = 0; u <= M; ++u) {
    Terms t;
    for (int n = 0; n < v.n_free; ++n) {
      t.push_back({wvar[u][n], quad_coef});
      t.push_back({svar[u][n], cube_coef});
    }
    p.linear.push_back({std::move(t), cfg.battery_wslots - N * cfg.prop.blade_power_w,
                        "energy[u=" + std::to_string(u) + "]"});
  }

  // linearized collision avoidance between relay pairs
  for (int m = 0; m < M; ++m)
    for (int j = m + 1; j < M; ++j)
      for (int n = 0; n < v.n_free; ++n) {
        const Vec2 dp = exp.q_relay[m].col(n) - exp.q_relay[j].col(n);
        Terms t{{v.qx(m + 1, n), -2.0 * dp.x()},
                {v.qx(j + 1, n), 2.0 * dp.x()},
                {v.qy(m + 1, n), -2.0 * dp.y()},
                {v.qy(j + 1, n), 2.0 * dp.y()}};
        p.linear.push_back({std::move(t),
                            -(cfg.min_dist_m * cfg.min_dist_m + dp.squaredNorm()),
                            "collision[" + std::to_string(m) + "," + std::to_string(j) + ",n=" +
                                std::to_string(n) + "]"});
      }

  return p;
}

namespace {

Eigen::VectorXd traj_warm_start(const Scenario& cfg, const NetworkState& state,
                                const ScpExpansion& exp, const convex::Program& p) {
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  TrajVars v{N, M, N - 1, 0};
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.num_vars());

  for (int n = 0; n < v.n_free; ++n) {
    x[v.qx(0, n)] = state.traj_mbs(0, n);
    x[v.qy(0, n)] = state.traj_mbs(1, n);
    for (int m = 0; m < M; ++m) {
      x[v.qx(m + 1, n)] = state.traj_relay[m](0, n);
      x[v.qy(m + 1, n)] = state.traj_relay[m](1, n);
    }
  }
  int idx = v.base_after_q();
  double mu = std::numeric_limits<double>::infinity();
  Eigen::VectorXd per_user = Eigen::VectorXd::Zero(K);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      for (int n = D; n < N; ++n)
        if (state.sched_hop2[m](k, n) > kSchedEps) {
          const double d0 = exp.rate_hop2[m](k, n) - 1e-9;
          x[idx] = d0;
          per_user[k] += state.sched_hop2[m](k, n) * d0;
          ++idx;
        }
  mu = per_user.minCoeff() / N;
  x[v.mu] = std::max(0.0, mu - 1e-9);

  auto fill_moves = [&](const Mat2X& q, int u) {
    (void)u;
    for (int n = 0; n < v.n_free; ++n) {
      const int nn = (n + 1) % v.n_free;
      const double d2 = (q.col(nn) - q.col(n)).squaredNorm();
      x[idx] = d2 + 1e-9;        // w
      x[idx + 1] = d2 * std::sqrt(d2) + 1e-9;  // s
      idx += 2;
    }
  };
  // variable order above: all w/s interleaved per uav, matching build order
  idx = v.base_after_q();
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      for (int n = D; n < N; ++n)
        if (state.sched_hop2[m](k, n) > kSchedEps) ++idx;
  fill_moves(state.traj_mbs, 0);
  for (int m = 0; m < M; ++m) fill_moves(state.traj_relay[m], m + 1);
  return x;
}

void extract_trajectories(const Scenario& cfg, const Eigen::VectorXd& x, Mat2X& q_mbs,
                          std::vector<Mat2X>& q_relay) {
  const int M = cfg.num_relays, N = cfg.num_slots;
  TrajVars v{N, M, N - 1, 0};
  q_mbs.resize(2, N);
  q_relay.assign(M, Mat2X(2, N));
  for (int n = 0; n < N; ++n) {
    q_mbs(0, n) = x[v.qx(0, n)];
    q_mbs(1, n) = x[v.qy(0, n)];
    for (int m = 0; m < M; ++m) {
      q_relay[m](0, n) = x[v.qx(m + 1, n)];
      q_relay[m](1, n) = x[v.qy(m + 1, n)];
    }
  }
}

}  // namespace

ScpStepResult scp_step(const Scenario& cfg, const NetworkState& state, double eta,
                       const TrajOptions& opts) {
  const ScpExpansion exp = compute_expansion(cfg, state);
  const convex::Program p = build_traj_program(cfg, state, exp, opts);

  convex::SolveOptions so;
  so.opt_tol = 1e-7;
  so.warm_start = traj_warm_start(cfg, state, exp, p);
  const convex::SolveReport rep = convex::solve_convex(p, so);

  ScpStepResult out;
  out.status = rep.status;
  out.q_mbs = state.traj_mbs;
  out.q_relay = state.traj_relay;
  out.mu_true = min_user_rate(cfg, state);
  if (rep.status != convex::Status::Optimal) return out;

  Mat2X q_new;
  std::vector<Mat2X> qr_new;
  extract_trajectories(cfg, rep.x, q_new, qr_new);

  NetworkState cand = state;
  cand.traj_mbs = state.traj_mbs + eta * (q_new - state.traj_mbs);
  for (int m = 0; m < cfg.num_relays; ++m)
    cand.traj_relay[m] = state.traj_relay[m] + eta * (qr_new[m] - state.traj_relay[m]);

  const double mu_cand = min_user_rate(cfg, cand);
  const bool feasible = constraint_residuals(cfg, cand).feasible(1e-6);
  out.mu_lb = rep.objective;
  if (feasible && mu_cand >= out.mu_true - opts.accept_tol) {
    out.accepted = true;
    out.mu_true = mu_cand;
    out.q_mbs = cand.traj_mbs;
    out.q_relay = cand.traj_relay;
  }
  return out;
}

TrajResult solve_trajectories(const Scenario& cfg, const NetworkState& state,
                              const TrajOptions& opts) {
  TrajResult res;
  NetworkState cur = state;
  res.mu = min_user_rate(cfg, cur);
  double eta = 1.0;
  double last_lb = -std::numeric_limits<double>::infinity();

  for (int it = 0; it < opts.max_iterations; ++it) {
    ++res.iterations;
    ScpStepResult step = scp_step(cfg, cur, eta, opts);
    if (step.status != convex::Status::Optimal) {
      // shrink to a trust box around the expansion point and retry once
      TrajOptions boxed = opts;
      boxed.trust_radius_m = 2.0 * std::max(cfg.vmax_mbs, cfg.vmax_relay) * cfg.slot_s;
      step = scp_step(cfg, cur, eta, boxed);
      if (step.status != convex::Status::Optimal) {
        res.status = step.status;
        break;
      }
    }
    if (!step.accepted) {
      eta *= 0.5;
      if (eta < opts.min_damping) break;
      continue;
    }
    cur.traj_mbs = step.q_mbs;
    cur.traj_relay = step.q_relay;
    res.mu = step.mu_true;
    eta = 1.0;
    const double denom = std::max(std::abs(last_lb), 1e-9);
    if (last_lb > -std::numeric_limits<double>::infinity() &&
        std::abs(step.mu_lb - last_lb) / denom < opts.rel_tol)
      break;
    last_lb = step.mu_lb;
  }
  res.q_mbs = cur.traj_mbs;
  res.q_relay = cur.traj_relay;
  return res;
}

}  // namespace uavrelay
