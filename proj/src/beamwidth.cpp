// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/beamwidth.hpp"

#include <cmath>
#include <sstream>

#include "uavrelay/model.hpp"

namespace uavrelay {

namespace {
constexpr double kLn2 = 0.6931471805599453;
constexpr double kSchedEps = 1e-9;
constexpr double kPi = 3.141592653589793;
}  // namespace

double rate_grad_r(double gamma_prime, double cos_theta, double r) {
  const double cr = std::pow(cos_theta, r);
  const double num = gamma_prime * cr * ((r + 1.0) * std::log(cos_theta) + 1.0);
  const double den = kLn2 * (gamma_prime * (r + 1.0) * cr + 1.0);
  return num / den;
}

double gamma_prime_hop1(const Scenario& cfg, double p_w, const Vec2& q_mbs, const Vec2& q_relay) {
  const double dh = cfg.alt_diff();
  const double d2 = (q_mbs - q_relay).squaredNorm() + dh * dh;
  return p_w * cfg.rho0_mbs() / (cfg.noise_w * std::pow(d2, 0.5 * cfg.pathloss_exp));
}

double gamma_prime_hop2(const Scenario& cfg, double p_w, const Vec2& q_relay, const Vec2& user) {
  const double d2 = (q_relay - user).squaredNorm() + cfg.alt_relay_m * cfg.alt_relay_m;
  return p_w * cfg.rho0_relay() / (cfg.noise_w * std::pow(d2, 0.5 * cfg.pathloss_exp));
}

namespace {

struct BeamVars {
  int n_slots, n_relays;
  int mu = 0;
  int r_mbs(int n) const { return 1 + n; }
  int r_relay(int m, int n) const { return 1 + n_slots + m * n_slots + n; }
};

struct LinkLin {         // R^L(r) = slope * (r - r_p) + value
  double slope = 0.0;
  double value = 0.0;
};

LinkLin linearize_hop1(const Scenario& cfg, const NetworkState& s, int m, int n) {
  LinkLin out;
  const double p = s.power_mbs[n];
  if (p <= 0.0) return out;
  const double gp = gamma_prime_hop1(cfg, p, s.traj_mbs.col(n), s.traj_relay[m].col(n));
  const double dh = std::abs(cfg.alt_diff());
  const double d2 = (s.traj_mbs.col(n) - s.traj_relay[m].col(n)).squaredNorm() + dh * dh;
  const double cos_theta = dh / std::sqrt(d2);
  out.slope = rate_grad_r(gp, cos_theta, s.beam_mbs[n]);
  out.value = rate_hop1(cfg, p, s.traj_mbs.col(n), s.traj_relay[m].col(n), s.beam_mbs[n]);
  return out;
}

LinkLin linearize_hop2(const Scenario& cfg, const NetworkState& s, int m, int k, int n) {
  LinkLin out;
  const double p = s.power_relay(m, n);
  if (p <= 0.0) return out;
  const double gp = gamma_prime_hop2(cfg, p, s.traj_relay[m].col(n), cfg.user_pos.col(k));
  const double d2 = (s.traj_relay[m].col(n) - cfg.user_pos.col(k)).squaredNorm() +
                    cfg.alt_relay_m * cfg.alt_relay_m;
  const double cos_theta = cfg.alt_relay_m / std::sqrt(d2);
  out.slope = rate_grad_r(gp, cos_theta, s.beam_relay(m, n));
  out.value = rate_hop2(cfg, p, s.traj_relay[m].col(n), cfg.user_pos.col(k), s.beam_relay(m, n));
  return out;
}

}  // namespace

convex::Program build_beam_lp(const Scenario& cfg, const NetworkState& state, double eps_trust) {
  using convex::Terms;
  state.check_dims(cfg);
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  BeamVars v{N, M, 0};

  const double mu_cap =
      std::log2(1.0 + cfg.p_max_relay * cfg.rho0_relay() * (cfg.beam_max + 1.0) /
                          (cfg.noise_w * std::pow(cfg.alt_relay_m, cfg.pathloss_exp)));

  convex::Program p;
  p.add_var("mu", -mu_cap, mu_cap);
  p.objective[v.mu] = 1.0;
  for (int n = 0; n < N; ++n)
    p.add_var("rB[" + std::to_string(n) + "]",
              std::max(cfg.beam_min, state.beam_mbs[n] - eps_trust),
              std::min(cfg.beam_max, state.beam_mbs[n] + eps_trust));
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n)
      p.add_var("r" + std::to_string(m) + "[" + std::to_string(n) + "]",
                std::max(cfg.beam_min, state.beam_relay(m, n) - eps_trust),
                std::min(cfg.beam_max, state.beam_relay(m, n) + eps_trust));

  // linearizations at the expansion exponents
  std::vector<Eigen::MatrixXd> slope2(M, Eigen::MatrixXd::Zero(K, N)),
      value2(M, Eigen::MatrixXd::Zero(K, N));
  Eigen::MatrixXd slope1 = Eigen::MatrixXd::Zero(M, N), value1 = Eigen::MatrixXd::Zero(M, N);
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      if (state.sched_hop1(m, n) > kSchedEps) {
        const LinkLin l = linearize_hop1(cfg, state, m, n);
        slope1(m, n) = l.slope;
        value1(m, n) = l.value;
      }
      for (int k = 0; k < K; ++k)
        if (state.sched_hop2[m](k, n) > kSchedEps) {
          const LinkLin l = linearize_hop2(cfg, state, m, k, n);
          slope2[m](k, n) = l.slope;
          value2[m](k, n) = l.value;
        }
    }

  // min-rate rows over linearized hop-2 rates
  for (int k = 0; k < K; ++k) {
    Terms t{{v.mu, 1.0}};
    double rhs = 0.0;
    for (int m = 0; m < M; ++m)
      for (int n = D; n < N; ++n) {
        const double a = state.sched_hop2[m](k, n);
        if (a <= kSchedEps) continue;
        t.push_back({v.r_relay(m, n), -a * slope2[m](k, n) / N});
        rhs += a * (value2[m](k, n) - slope2[m](k, n) * state.beam_relay(m, n)) / N;
      }
    p.linear.push_back({std::move(t), rhs, "minrate[k=" + std::to_string(k) + "]"});
  }

  // causality with both hops linearized
  for (int m = 0; m < M; ++m)
    for (int n = D; n < N; ++n) {
      Terms t;
      double rhs = 0.0;
      bool any = false;
      for (int i = 0; i <= n - D; ++i) {
        const double beta = state.sched_hop1(m, i);
        if (beta <= kSchedEps) continue;
        t.push_back({v.r_mbs(i), -beta * slope1(m, i)});
        rhs += beta * (value1(m, i) - slope1(m, i) * state.beam_mbs[i]);
        any = true;
      }
      for (int i = D; i <= n; ++i)
        for (int k = 0; k < K; ++k) {
          const double a = state.sched_hop2[m](k, i);
          if (a <= kSchedEps) continue;
          t.push_back({v.r_relay(m, i), a * slope2[m](k, i)});
          rhs -= a * (value2[m](k, i) - slope2[m](k, i) * state.beam_relay(m, i));
          any = true;
        }
      if (!any) continue;
      p.linear.push_back(
          {std::move(t), rhs, "causality[m=" + std::to_string(m) + ",n=" + std::to_string(n) + "]"});
    }
  return p;
}

SlpResult solve_beamwidths(const Scenario& cfg, const NetworkState& state, const BeamOptions& opts) {
  const int M = cfg.num_relays, N = cfg.num_slots;
  BeamVars v{N, M, 0};

  SlpResult res;
  NetworkState cur = state;
  res.mu = min_user_rate(cfg, cur);
  double eps = opts.trust_init;

  for (int it = 0; it < opts.max_iterations; ++it) {
    ++res.iterations;
    const convex::Program p = build_beam_lp(cfg, cur, eps);
    const convex::SolveReport rep = convex::solve_lp(p);
    if (rep.status != convex::Status::Optimal) {
      res.status = rep.status;
      break;
    }
    NetworkState cand = cur;
    for (int n = 0; n < N; ++n) {
      cand.beam_mbs[n] = rep.x[v.r_mbs(n)];
      for (int m = 0; m < M; ++m) cand.beam_relay(m, n) = rep.x[v.r_relay(m, n)];
    }
    const double mu_cand = min_user_rate(cfg, cand);
    const bool feasible = constraint_residuals(cfg, cand).feasible(1e-6);
    if (feasible && mu_cand >= res.mu - opts.accept_tol) {
      const double improvement = mu_cand - res.mu;
      cur = cand;
      res.mu = std::max(res.mu, mu_cand);
      // small accepted improvements shrink the trust radius as well; the run
      // ends once the radius no longer resolves the exponents
      if (improvement / std::max(res.mu, 1e-9) < opts.rel_tol) eps *= 0.5;
    } else {
      eps *= 0.5;
    }
    if (eps < 5e-4) break;
  }
  res.beam_mbs = cur.beam_mbs;
  res.beam_relay = cur.beam_relay;
  res.mu = min_user_rate(cfg, cur);
  return res;
}

double level_curve_lhs(double gamma_prime, double theta_rad, double r) {
  const double c = std::cos(theta_rad);
  const double cr = std::pow(c, r);
  return cr * ((r + 1.0) * std::log(c) + 1.0) / ((r + 1.0) * cr + 1.0 / gamma_prime);
}

std::vector<LevelCurvePoint> level_curves(double gamma_prime,
                                          const std::vector<double>& theta_deg_grid,
                                          const std::vector<double>& levels) {
  std::vector<LevelCurvePoint> out;
  const double r_max_scan = 20.0, step = 0.05;
  for (const double level : levels) {
    for (const double theta_deg : theta_deg_grid) {
      const double theta = theta_deg * kPi / 180.0;
      int branch = 0;
      double prev_r = 0.0;
      double prev_f = level_curve_lhs(gamma_prime, theta, prev_r) - level;
      bool found = false;
      for (double r = step; r <= r_max_scan + 1e-12; r += step) {
        const double f = level_curve_lhs(gamma_prime, theta, r) - level;
        if (prev_f == 0.0 || (prev_f < 0.0) != (f < 0.0)) {
          double lo = prev_r, hi = r, flo = prev_f;
          for (int it = 0; it < 100 && hi - lo > 1e-8; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = level_curve_lhs(gamma_prime, theta, mid) - level;
            if ((flo < 0.0) == (fm < 0.0)) {
              lo = mid;
              flo = fm;
            } else {
              hi = mid;
            }
          }
          out.push_back({gamma_prime, level, theta_deg, branch++, 0.5 * (lo + hi)});
          found = true;
        }
        prev_r = r;
        prev_f = f;
      }
      if (!found) out.push_back({gamma_prime, level, theta_deg, -1, 0.0});
    }
  }
  return out;
}

std::string level_curves_csv(const std::vector<LevelCurvePoint>& points) {
  std::ostringstream os;
  os.precision(17);
  os << "gamma,K,theta_deg,branch,r\n";
  for (const auto& p : points)
    os << p.gamma_prime << "," << p.level << "," << p.theta_deg << "," << p.branch << "," << p.r
       << "\n";
  return os.str();
}

}  // namespace uavrelay
