// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/power.hpp"

#include <algorithm>
#include <cmath>

#include "uavrelay/model.hpp"

namespace uavrelay {

namespace {
constexpr double kLn2 = 0.6931471805599453;
constexpr double kSchedEps = 1e-9;
}  // namespace

EquivalentChannels equivalent_channels(const Scenario& cfg, const NetworkState& state) {
  state.check_dims(cfg);
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots;
  EquivalentChannels ch;
  ch.hop1.resize(M, N);
  ch.hop2.assign(M, Eigen::MatrixXd(K, N));
  const double dh = std::abs(cfg.alt_diff());
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      {
        const double r = state.beam_mbs[n];
        const double d2 = (state.traj_mbs.col(n) - state.traj_relay[m].col(n)).squaredNorm() + dh * dh;
        ch.hop1(m, n) = cfg.rho0_mbs() * (r + 1.0) * std::pow(dh, r) /
                        (cfg.noise_w * std::pow(d2, 0.5 * (cfg.pathloss_exp + r)));
      }
      for (int k = 0; k < K; ++k) {
        const double r = state.beam_relay(m, n);
        const double d2 = (state.traj_relay[m].col(n) - cfg.user_pos.col(k)).squaredNorm() +
                          cfg.alt_relay_m * cfg.alt_relay_m;
        ch.hop2[m](k, n) = cfg.rho0_relay() * (r + 1.0) * std::pow(cfg.alt_relay_m, r) /
                           (cfg.noise_w * std::pow(d2, 0.5 * (cfg.pathloss_exp + r)));
      }
    }
  return ch;
}

double DualState::w(int m, int k, int n) const {
  double sum = 0.0;
  for (int i = n; i < lambda_caus.cols(); ++i) sum += lambda_caus(m, i);
  return lambda_user[k] - sum;
}

double DualState::z(int m, int n, int delay) const {
  double sum = 0.0;
  for (int i = n + delay; i < lambda_caus.cols(); ++i) sum += lambda_caus(m, i);
  return sum;
}

Eigen::MatrixXd relay_power_wf(const Scenario& cfg, const Schedule& x,
                               const EquivalentChannels& ch, double zeta) {
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(M, N);
  for (int m = 0; m < M; ++m)
    for (int n = D; n < N; ++n) {
      int served = -1;
      for (int k = 0; k < K; ++k)
        if (x.hop2[m](k, n) > kSchedEps && (served < 0 || x.hop2[m](k, n) > x.hop2[m](served, n)))
          served = k;
      if (served < 0) continue;
      const double gamma = ch.hop2[m](served, n);
      if (gamma <= 0.0) continue;
      p(m, n) = std::clamp(zeta - 1.0 / gamma, 0.0, cfg.p_max_relay);
    }
  return p;
}

Eigen::VectorXd mbs_power_wf(const Scenario& cfg, const Schedule& x, const EquivalentChannels& ch,
                             double xi) {
  const int N = cfg.num_slots, M = cfg.num_relays, D = cfg.delay_slots;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(N);
  for (int n = 0; n < N - D; ++n) {
    int served = -1;
    for (int m = 0; m < M; ++m)
      if (x.hop1(m, n) > kSchedEps && (served < 0 || x.hop1(m, n) > x.hop1(served, n))) served = m;
    if (served < 0) continue;
    const double gamma = ch.hop1(served, n);
    if (gamma <= 0.0) continue;
    p[n] = std::clamp(xi - 1.0 / gamma, 0.0, cfg.p_max_mbs);
  }
  return p;
}

namespace {

// ---------------------------------------------------------------------------
// shared dual machinery

struct ActiveLink {
  int user;
  double weight;  // a_{m,k}[n]
  double gamma;   // SNR per watt
};

struct PowerContext {
  const Scenario* cfg;
  const Schedule* x;
  const EquivalentChannels* ch;
  int M, K, N, D;
  int caus_count;                                       // per relay: N - D
  std::vector<std::vector<std::vector<ActiveLink>>> links;  // [m][n - D] active hop-2 links
  double mu_cap;                                        // bound on total bits per user

  int dim() const { return K + M * caus_count; }
  int caus_index(int m, int n) const { return K + m * caus_count + (n - D); }

  static PowerContext make(const Scenario& cfg, const Schedule& x, const EquivalentChannels& ch) {
    PowerContext c;
    c.cfg = &cfg;
    c.x = &x;
    c.ch = &ch;
    c.M = cfg.num_relays;
    c.K = cfg.num_users;
    c.N = cfg.num_slots;
    c.D = cfg.delay_slots;
    c.caus_count = c.N - c.D;
    c.links.assign(c.M, std::vector<std::vector<ActiveLink>>(c.caus_count));
    double gmax = 0.0;
    for (int m = 0; m < c.M; ++m)
      for (int n = c.D; n < c.N; ++n)
        for (int k = 0; k < c.K; ++k) {
          const double a = x.hop2[m](k, n);
          if (a > kSchedEps && ch.hop2[m](k, n) > 0.0) {
            c.links[m][n - c.D].push_back({k, a, ch.hop2[m](k, n)});
            gmax = std::max(gmax, ch.hop2[m](k, n));
          }
        }
    c.mu_cap = c.N * std::log2(1.0 + cfg.p_max_relay * std::max(gmax, 1.0)) + 1.0;
    return c;
  }
};

// marginal utility sum_k (a w) gamma / (ln2 (1 + p gamma)) of a slot
double slot_marginal(const std::vector<ActiveLink>& links, const Eigen::VectorXd& aw, double p) {
  double s = 0.0;
  for (std::size_t j = 0; j < links.size(); ++j)
    s += aw[j] * links[j].gamma / (kLn2 * (1.0 + p * links[j].gamma));
  return s;
}

// power at which the slot marginal equals level (clamped to [0, pmax])
double slot_power_at_level(const std::vector<ActiveLink>& links, const Eigen::VectorXd& aw,
                           double level, double pmax) {
  if (links.empty() || aw.maxCoeff() <= 0.0) return 0.0;
  if (level <= 0.0) return pmax;
  if (links.size() == 1) {  // closed form [zeta - 1/gamma]^+
    const double zeta = aw[0] / (kLn2 * level);
    return std::clamp(zeta - 1.0 / links[0].gamma, 0.0, pmax);
  }
  if (slot_marginal(links, aw, 0.0) <= level) return 0.0;
  if (slot_marginal(links, aw, pmax) >= level) return pmax;
  double lo = 0.0, hi = pmax;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slot_marginal(links, aw, mid) > level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct RelayInner {
  double value = 0.0;
  Eigen::VectorXd power;                  // per slot (offset D)
  std::vector<Eigen::VectorXd> bits;      // per slot: rate per active link
  double nu = 0.0;                        // average-power multiplier
};

// max over the relay's power budget of sum (a w) log2(1 + p gamma)
RelayInner relay_inner(const PowerContext& c, int m, const Eigen::MatrixXd& w_vals) {
  RelayInner out;
  out.power = Eigen::VectorXd::Zero(c.caus_count);
  out.bits.assign(c.caus_count, Eigen::VectorXd());
  const double pmax = c.cfg->p_max_relay;
  const double budget = c.cfg->p_avg_relay * c.N;

  std::vector<Eigen::VectorXd> aw(c.caus_count);
  double level_hi = 0.0;
  for (int s = 0; s < c.caus_count; ++s) {
    const auto& links = c.links[m][s];
    aw[s].resize(links.size());
    for (std::size_t j = 0; j < links.size(); ++j)
      aw[s][j] = links[j].weight * std::max(0.0, w_vals(links[j].user, s));
    if (!links.empty() && aw[s].size() > 0 && aw[s].maxCoeff() > 0.0)
      level_hi = std::max(level_hi, slot_marginal(links, aw[s], 0.0));
  }

  auto total_power = [&](double level) {
    double sum = 0.0;
    for (int s = 0; s < c.caus_count; ++s)
      sum += slot_power_at_level(c.links[m][s], aw[s], level, pmax);
    return sum;
  };

  double nu = 0.0;
  if (total_power(0.0) > budget + 1e-15) {
    double lo = 0.0, hi = std::max(level_hi, 1e-12);
    for (int it = 0; it < 90; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total_power(mid) > budget ? lo : hi) = mid;
    }
    nu = 0.5 * (lo + hi);
  }
  out.nu = nu;
  for (int s = 0; s < c.caus_count; ++s) {
    const auto& links = c.links[m][s];
    const double p = slot_power_at_level(links, aw[s], nu, pmax);
    out.power[s] = p;
    out.bits[s].resize(links.size());
    for (std::size_t j = 0; j < links.size(); ++j) {
      out.bits[s][j] = std::log2(1.0 + p * links[j].gamma);
      out.value += aw[s][j] * out.bits[s][j];
    }
  }
  return out;
}

struct MbsInner {
  double value = 0.0;
  Eigen::VectorXd power;     // N
  Eigen::VectorXd delivered; // per slot: beta-weighted rate towards the scheduled relay
  double nu = 0.0;
};

// max over the MBS power budget of sum_i z_m[i] beta R_B(p[i]); power_cost
// adds the plain min-power objective (1·p) used by the O-P2.2 inner problem.
MbsInner mbs_inner(const PowerContext& c, const Eigen::MatrixXd& z_vals, double power_cost) {
  MbsInner out;
  out.power = Eigen::VectorXd::Zero(c.N);
  out.delivered = Eigen::VectorXd::Zero(c.N);
  const double pmax = c.cfg->p_max_mbs;
  const double budget = c.cfg->p_avg_mbs * c.N;

  // per-slot weighted links; with fractional beta several scheduled relays
  // contribute sum_m beta_m z_m log2(1 + p gamma_m), handled by the generic
  // marginal equation below
  std::vector<std::vector<ActiveLink>> slot_links(c.N);
  for (int n = 0; n < c.N - c.D; ++n)
    for (int m = 0; m < c.M; ++m) {
      const double beta = c.x->hop1(m, n);
      if (beta > kSchedEps && c.ch->hop1(m, n) > 0.0 && z_vals(m, n) > 0.0)
        slot_links[n].push_back({m, beta * z_vals(m, n), c.ch->hop1(m, n)});
    }

  auto slot_m = [&](int n, double p) {
    double s = -power_cost;
    for (const auto& l : slot_links[n]) s += l.weight * l.gamma / (kLn2 * (1.0 + p * l.gamma));
    return s;
  };
  auto slot_p = [&](int n, double level) {
    if (slot_links[n].empty()) return 0.0;
    if (slot_m(n, 0.0) <= level) return 0.0;
    if (slot_m(n, pmax) >= level) return pmax;
    double lo = 0.0, hi = pmax;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slot_m(n, mid) > level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto total = [&](double level) {
    double sum = 0.0;
    for (int n = 0; n < c.N - c.D; ++n) sum += slot_p(n, level);
    return sum;
  };

  double nu = 0.0;
  if (total(0.0) > budget + 1e-15) {
    double hi = 1e-9;
    for (int n = 0; n < c.N - c.D; ++n) hi = std::max(hi, slot_m(n, 0.0));
    double lo = 0.0;
    for (int it = 0; it < 90; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(mid) > budget ? lo : hi) = mid;
    }
    nu = 0.5 * (lo + hi);
  }
  out.nu = nu;
  for (int n = 0; n < c.N - c.D; ++n) {
    const double p = slot_p(n, nu);
    out.power[n] = p;
    for (const auto& l : slot_links[n]) {
      const double rate = std::log2(1.0 + p * l.gamma);
      out.value += l.weight * rate;
    }
    for (int m = 0; m < c.M; ++m)
      if (c.x->hop1(m, n) > kSchedEps)
        out.delivered[n] += c.x->hop1(m, n) * std::log2(1.0 + p * c.ch->hop1(m, n));
  }
  out.value -= power_cost * out.power.sum();
  return out;
}

// ---------------------------------------------------------------------------
// cutting-plane master over the shared multipliers

struct Cut {
  int component;  // 0..M-1 relay inner, M = MBS inner (joint dual only)
  double value;
  Eigen::VectorXd grad;   // dim theta
  Eigen::VectorXd point;  // theta at which the cut was taken
};

struct KelleyMaster {
  const PowerContext* c;
  int n_components;
  Eigen::VectorXd linear_term;  // f in D(theta) = cuts + f^T theta (+ cap term)
  std::vector<Cut> cuts;
  double theta_box = 2.0;

  // master LP: minimize sum eta_c + mu_cap * chi + f^T theta
  //   s.t. eta_c >= cuts, chi >= 1 - sum lambda_user, w rows, trust box
  bool solve(const Eigen::VectorXd& center, double radius, Eigen::VectorXd& theta_out,
             double& lb_out) const {
    using convex::Terms;
    const int dim = c->dim();
    convex::Program p;
    for (int i = 0; i < dim; ++i) {
      const double lo = std::max(0.0, center[i] - radius);
      const double hi = std::min(theta_box, center[i] + radius);
      p.add_var("th" + std::to_string(i), lo, hi);
    }
    std::vector<int> eta(n_components);
    for (int cc = 0; cc < n_components; ++cc) {
      eta[cc] = p.add_var("eta" + std::to_string(cc), -1e9, 1e9);
      p.objective[eta[cc]] = -1.0;  // solve_lp maximizes; we minimize
    }
    const int chi = p.add_var("chi", 0.0, 1.0);
    p.objective[chi] = -c->mu_cap;
    for (int i = 0; i < dim; ++i) p.objective[i] = -linear_term[i];

    for (const auto& cut : cuts) {
      Terms t{{eta[cut.component], -1.0}};
      double rhs = -cut.value;
      for (int i = 0; i < dim; ++i)
        if (cut.grad[i] != 0.0) {
          t.push_back({i, cut.grad[i]});
          rhs += cut.grad[i] * cut.point[i];
        }
      p.linear.push_back({std::move(t), rhs, "cut"});
    }
    {  // chi >= 1 - sum lambda_user
      Terms t{{chi, -1.0}};
      for (int k = 0; k < c->K; ++k) t.push_back({k, -1.0});
      p.linear.push_back({std::move(t), -1.0, "cap"});
    }
    // dual feasibility: w_{m,k}[D] >= 0
    for (int m = 0; m < c->M; ++m)
      for (int k = 0; k < c->K; ++k) {
        Terms t{{k, -1.0}};
        for (int n = c->D; n < c->N; ++n) t.push_back({c->caus_index(m, n), 1.0});
        p.linear.push_back({std::move(t), 0.0, "wpos"});
      }

    convex::SolveOptions so;
    const auto rep = convex::solve_lp(p, so);
    if (rep.status != convex::Status::Optimal) return false;
    theta_out = rep.x.head(dim);
    lb_out = -rep.objective;
    return true;
  }
};

Eigen::MatrixXd w_matrix(const PowerContext& c, const Eigen::VectorXd& theta, int m) {
  // w(k, s) for s = n - D, clipped at zero consistently with Theta
  Eigen::MatrixXd w(c.K, c.caus_count);
  double suffix = 0.0;
  Eigen::VectorXd suffixes(c.caus_count);
  for (int s = c.caus_count - 1; s >= 0; --s) {
    suffix += theta[c.caus_index(m, s + c.D)];
    suffixes[s] = suffix;
  }
  for (int k = 0; k < c.K; ++k)
    for (int s = 0; s < c.caus_count; ++s) w(k, s) = theta[k] - suffixes[s];
  return w;
}

Eigen::MatrixXd z_matrix(const PowerContext& c, const Eigen::VectorXd& theta) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(c.M, c.N);
  for (int m = 0; m < c.M; ++m) {
    double suffix = 0.0;
    for (int i = c.N - c.D - 1; i >= 0; --i) {
      suffix += theta[c.caus_index(m, i + c.D)];
      z(m, i) = suffix;
    }
  }
  return z;
}

double cap_term(const PowerContext& c, const Eigen::VectorXd& theta) {
  double s = 1.0;
  for (int k = 0; k < c.K; ++k) s -= theta[k];
  return c.mu_cap * std::max(0.0, s);
}

}  // namespace

// ---------------------------------------------------------------------------

RelayPowerResult solve_relay_power(const Scenario& cfg, const Schedule& x,
                                   const EquivalentChannels& ch,
                                   const Eigen::MatrixXd& hop1_rates) {
  PowerContext c = PowerContext::make(cfg, x, ch);
  const int dim = c.dim();

  // hop-1 prefix budget F_m[n]
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(c.M, c.N);
  for (int m = 0; m < c.M; ++m) {
    double acc = 0.0;
    for (int n = c.D; n < c.N; ++n) {
      acc += x.hop1(m, n - c.D) * hop1_rates(m, n - c.D);
      F(m, n) = acc;
    }
  }

  // linear term f^T theta from the constant hop-1 prefixes
  KelleyMaster master;
  master.c = &c;
  master.n_components = c.M;
  master.linear_term = Eigen::VectorXd::Zero(dim);
  for (int m = 0; m < c.M; ++m)
    for (int n = c.D; n < c.N; ++n) master.linear_term[c.caus_index(m, n)] = F(m, n);

  auto evaluate = [&](const Eigen::VectorXd& theta, std::vector<Cut>& new_cuts) {
    double total = cap_term(c, theta) + master.linear_term.dot(theta);
    for (int m = 0; m < c.M; ++m) {
      const Eigen::MatrixXd w = w_matrix(c, theta, m);
      const RelayInner inner = relay_inner(c, m, w);
      Cut cut;
      cut.component = m;
      cut.value = inner.value;
      cut.grad = Eigen::VectorXd::Zero(dim);
      for (int s = 0; s < c.caus_count; ++s) {
        const auto& links = c.links[m][s];
        for (std::size_t j = 0; j < links.size(); ++j) {
          const double at = links[j].weight * inner.bits[s][j];
          cut.grad[links[j].user] += at;
          // w_{m,k}[n] depends on the multiplier suffix from the link's slot on
          for (int n = s + c.D; n < c.N; ++n) cut.grad[c.caus_index(m, n)] -= at;
        }
      }
      cut.point = theta;
      total += inner.value;
      new_cuts.push_back(std::move(cut));
    }
    return total;
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < c.K; ++k) theta[k] = 1.0 / c.K;
  Eigen::VectorXd theta_best = theta;
  double d_best = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double radius = 0.5;

  RelayPowerResult res;
  const int budget = 260 + 12 * dim;
  int it = 0;
  for (; it < budget; ++it) {
    std::vector<Cut> new_cuts;
    const double val = evaluate(theta, new_cuts);
    for (auto& cut : new_cuts) master.cuts.push_back(std::move(cut));
    if (val < d_best - 1e-14) {
      d_best = val;
      theta_best = theta;
      radius = std::min(radius * 1.6, 1.0);
    } else {
      radius = std::max(radius * 0.7, 1e-4);
    }
    Eigen::VectorXd theta_next;
    double master_lb;
    if (!master.solve(theta_best, radius, theta_next, master_lb)) break;
    // the boxed master is only a local model; a full-box resolve certifies
    if (radius >= master.theta_box || (it % 12 == 11)) {
      Eigen::VectorXd tmp;
      double full_lb;
      if (master.solve(theta_best, master.theta_box, tmp, full_lb)) lb = std::max(lb, full_lb);
    }
    theta = theta_next;
    if (d_best - lb <= 1e-8 * std::max(1.0, std::abs(d_best))) break;
  }

  // primal recovery at the best multipliers: water-filling powers, bits
  // capped by the hop-1 prefix budget, then powers re-tightened so the full
  // transmit rate equals the delivered bits (no wasted relay power)
  res.power = Eigen::MatrixXd::Zero(c.M, c.N);
  res.bits.assign(c.M, Eigen::MatrixXd::Zero(c.K, c.N));
  res.duals.lambda_user = theta_best.head(c.K);
  res.duals.lambda_caus = Eigen::MatrixXd::Zero(c.M, c.N);
  for (int m = 0; m < c.M; ++m)
    for (int n = c.D; n < c.N; ++n) res.duals.lambda_caus(m, n) = theta_best[c.caus_index(m, n)];
  res.duals.lambda_avg = Eigen::VectorXd::Zero(c.M);
  res.duals.lambda_peak = Eigen::MatrixXd::Zero(c.M, c.N);

  Eigen::VectorXd user_bits = Eigen::VectorXd::Zero(c.K);
  for (int m = 0; m < c.M; ++m) {
    const Eigen::MatrixXd w = w_matrix(c, theta_best, m);
    RelayInner inner = relay_inner(c, m, w);
    res.duals.lambda_avg[m] = inner.nu;
    double sent = 0.0;
    for (int s = 0; s < c.caus_count; ++s) {
      const int n = s + c.D;
      const auto& links = c.links[m][s];
      if (links.empty()) continue;
      double slot_bits = 0.0;
      for (std::size_t j = 0; j < links.size(); ++j)
        slot_bits += links[j].weight * inner.bits[s][j];
      const double allowed = F(m, n) - sent;
      double scale = 1.0;
      if (slot_bits > allowed + 1e-15) scale = std::max(0.0, allowed / std::max(slot_bits, 1e-300));
      double target = slot_bits * scale;
      // re-tighten the slot power so the aggregate weighted rate equals the
      // causality-capped target
      double p = inner.power[s];
      if (scale < 1.0) {
        auto aggregate = [&](double pw) {
          double sum = 0.0;
          for (const auto& l : links) sum += l.weight * std::log2(1.0 + pw * l.gamma);
          return sum;
        };
        double lo = 0.0, hi = p;
        for (int bt = 0; bt < 80; ++bt) {
          const double mid = 0.5 * (lo + hi);
          (aggregate(mid) < target ? lo : hi) = mid;
        }
        p = 0.5 * (lo + hi);
      }
      res.power(m, n) = p;
      double slot_sent = 0.0;
      for (const auto& l : links) {
        const double rate = std::log2(1.0 + p * l.gamma);
        res.bits[m](l.user, n) = rate;
        user_bits[l.user] += l.weight * rate;
        slot_sent += l.weight * rate;
      }
      sent += slot_sent;
      const double marginal = slot_marginal(links, [&] {
        Eigen::VectorXd aw(links.size());
        for (std::size_t j = 0; j < links.size(); ++j)
          aw[j] = links[j].weight * std::max(0.0, w(links[j].user, s));
        return aw;
      }(), p);
      if (p >= cfg.p_max_relay - 1e-12)
        res.duals.lambda_peak(m, n) = std::max(0.0, marginal - inner.nu);
    }
  }
  // Max-min redistribution of the leftover relay budget. At a degenerate
  // dual corner (some lambda_k = 0) the inner allocation leaves that user's
  // slots dark even though budget remains; water-filling the leftovers into
  // the worst user's slots closes the primal-dual gap.
  {
    Eigen::VectorXd spent = Eigen::VectorXd::Zero(c.M);
    std::vector<Eigen::VectorXd> sent_prefix(c.M, Eigen::VectorXd::Zero(c.N));
    for (int m = 0; m < c.M; ++m) {
      double acc = 0.0;
      for (int n = 0; n < c.N; ++n) {
        spent[m] += res.power(m, n);
        if (n >= c.D)
          for (int k = 0; k < c.K; ++k) acc += x.hop2[m](k, n) * res.bits[m](k, n);
        sent_prefix[m][n] = acc;
      }
    }
    const double budget = cfg.p_avg_relay * c.N;

    auto apply_raise = [&](int m, int n, double p_new) {
      // honor the causality suffix headroom, then commit
      const auto& links = c.links[m][n - c.D];
      auto slot_sent = [&](double p) {
        double s = 0.0;
        for (const auto& l : links) s += l.weight * std::log2(1.0 + p * l.gamma);
        return s;
      };
      double headroom = std::numeric_limits<double>::infinity();
      for (int i = n; i < c.N; ++i) headroom = std::min(headroom, F(m, i) - sent_prefix[m][i]);
      const double p0 = res.power(m, n);
      const double sent0 = slot_sent(p0);
      if (slot_sent(p_new) - sent0 > headroom) {
        double lo = p0, hi = p_new;
        for (int it2 = 0; it2 < 70; ++it2) {
          const double mid = 0.5 * (lo + hi);
          (slot_sent(mid) - sent0 <= headroom ? lo : hi) = mid;
        }
        p_new = lo;
      }
      if (p_new <= p0) return;
      res.power(m, n) = p_new;
      spent[m] += p_new - p0;
      const double delta_sent = slot_sent(p_new) - sent0;
      for (int i = n; i < c.N; ++i) sent_prefix[m][i] += delta_sent;
      for (const auto& l : links) {
        const double rate = std::log2(1.0 + p_new * l.gamma);
        user_bits[l.user] += l.weight * (rate - res.bits[m](l.user, n));
        res.bits[m](l.user, n) = rate;
      }
    };

    for (int guard = 0; guard < 8 * c.K * c.M + 40; ++guard) {
      int k_star = 0;
      for (int k = 1; k < c.K; ++k)
        if (user_bits[k] < user_bits[k_star]) k_star = k;
      double second = std::numeric_limits<double>::infinity();
      for (int k = 0; k < c.K; ++k)
        if (k != k_star && user_bits[k] > user_bits[k_star])
          second = std::min(second, user_bits[k]);

      bool raised = false;
      for (int m = 0; m < c.M; ++m) {
        const double leftover = budget - spent[m];
        if (leftover <= 1e-15) continue;
        std::vector<int> cand;
        for (int n = c.D; n < c.N; ++n)
          if (x.hop2[m](k_star, n) > kSchedEps && ch.hop2[m](k_star, n) > 0.0 &&
              res.power(m, n) < cfg.p_max_relay - 1e-15)
            cand.push_back(n);
        if (cand.empty()) continue;

        // common marginal level over the candidate slots; lower level means a
        // deeper raise; find the deepest level within budget and catch bounds
        auto tentative = [&](double level, double& add_power, double& add_bits) {
          add_power = 0.0;
          add_bits = 0.0;
          for (int n : cand) {
            const double a = x.hop2[m](k_star, n);
            const double g = ch.hop2[m](k_star, n);
            const double p0 = res.power(m, n);
            double p_new = (a * g / (kLn2 * level) - 1.0) / g;
            p_new = std::clamp(p_new, p0, cfg.p_max_relay);
            add_power += p_new - p0;
            add_bits += a * (std::log2(1.0 + p_new * g) - std::log2(1.0 + p0 * g));
          }
        };
        double level_hi = 0.0;  // marginal at zero raise
        for (int n : cand) {
          const double a = x.hop2[m](k_star, n);
          const double g = ch.hop2[m](k_star, n);
          level_hi = std::max(level_hi, a * g / (kLn2 * (1.0 + res.power(m, n) * g)));
        }
        if (level_hi <= 0.0) continue;
        const double max_gain = std::isfinite(second) ? second - user_bits[k_star]
                                                      : std::numeric_limits<double>::infinity();
        double lo = level_hi * 1e-9, hi = level_hi;
        for (int it2 = 0; it2 < 90; ++it2) {
          const double mid = 0.5 * (lo + hi);
          double ap, ab;
          tentative(mid, ap, ab);
          if (ap <= leftover && ab <= max_gain + 1e-12) hi = mid; else lo = mid;
        }
        double ap, ab;
        tentative(hi, ap, ab);
        if (ab <= 1e-13) continue;
        for (int n : cand) {
          const double a = x.hop2[m](k_star, n);
          const double g = ch.hop2[m](k_star, n);
          double p_new = (a * g / (kLn2 * hi) - 1.0) / g;
          p_new = std::clamp(p_new, res.power(m, n), cfg.p_max_relay);
          apply_raise(m, n, p_new);
        }
        raised = true;
      }
      if (!raised) break;
    }
  }
  res.mu = user_bits.minCoeff() / c.N;

  // KKT residual: complementary slackness of the recovered primal-dual pair
  double kkt = std::abs(std::min(0.0, 1.0 - theta_best.head(c.K).sum())) * c.mu_cap;
  const double mu_scale = std::max(1.0, user_bits.minCoeff());
  for (int k = 0; k < c.K; ++k)
    kkt = std::max(kkt, theta_best[k] * (user_bits[k] - user_bits.minCoeff()) / mu_scale);
  for (int m = 0; m < c.M; ++m) {
    double sent = 0.0;
    for (int n = c.D; n < c.N; ++n) {
      for (int k = 0; k < c.K; ++k) sent += x.hop2[m](k, n) * res.bits[m](k, n);
      kkt = std::max(kkt, theta_best[c.caus_index(m, n)] * (F(m, n) - sent) / mu_scale);
    }
  }
  res.kkt_residual = kkt;
  res.status = (d_best - lb <= 1e-6 * std::max(1.0, std::abs(d_best)))
                   ? convex::Status::Optimal
                   : convex::Status::MaxIter;
  return res;
}

MbsPowerResult solve_mbs_power(const Scenario& cfg, const Schedule& x,
                               const EquivalentChannels& ch,
                               const Eigen::MatrixXd& demand_prefix) {
  PowerContext c = PowerContext::make(cfg, x, ch);
  MbsPowerResult res;
  res.power = Eigen::VectorXd::Zero(c.N);

  // peak-only feasibility certificate
  for (int m = 0; m < c.M; ++m) {
    double acc = 0.0;
    for (int n = c.D; n < c.N; ++n) {
      acc += x.hop1(m, n - c.D) * std::log2(1.0 + cfg.p_max_mbs * ch.hop1(m, n - c.D));
      if (demand_prefix(m, n) > acc + 1e-9) {
        res.status = convex::Status::Infeasible;
        res.witness = "demand prefix exceeds peak-power delivery at relay " + std::to_string(m) +
                      ", slot " + std::to_string(n);
        return res;
      }
    }
  }
  if (demand_prefix.size() == 0 || demand_prefix.maxCoeff() <= 1e-15) return res;

  bool binary_hop1 = true;
  for (int n = 0; n < c.N; ++n) {
    int active = 0;
    for (int m = 0; m < c.M; ++m) {
      const double b = x.hop1(m, n);
      if (b > kSchedEps) {
        ++active;
        if (b < 1.0 - 1e-9) binary_hop1 = false;
      }
    }
    if (active > 1) binary_hop1 = false;
  }

  // Progressive filling: walk the prefixes in time order per relay and raise
  // a common water level over the window's slots until each deficit closes.
  // Prefix windows are nested, so only ever raising keeps the whole profile
  // optimal; with a binary hop-1 schedule the windows of different relays are
  // disjoint and the result is the exact minimum-power allocation.
  for (int m = 0; m < c.M; ++m) {
    auto delivered_prefix = [&](int upto) {  // slots i <= upto
      double acc = 0.0;
      for (int i = 0; i <= upto; ++i)
        if (x.hop1(m, i) > kSchedEps)
          acc += x.hop1(m, i) * std::log2(1.0 + res.power[i] * ch.hop1(m, i));
      return acc;
    };
    for (int n = c.D; n < c.N; ++n) {
      const double deficit = demand_prefix(m, n) - delivered_prefix(n - c.D);
      if (deficit <= 1e-12) continue;
      std::vector<int> window;
      double xi_hi = 0.0;
      for (int i = 0; i <= n - c.D; ++i)
        if (x.hop1(m, i) > kSchedEps && ch.hop1(m, i) > 0.0 &&
            res.power[i] < cfg.p_max_mbs - 1e-15) {
          window.push_back(i);
          xi_hi = std::max(xi_hi, cfg.p_max_mbs + 1.0 / ch.hop1(m, i));
        }
      auto apply = [&](double xi, bool commit) {
        double acc = 0.0;
        for (int i = 0; i <= n - c.D; ++i) {
          if (x.hop1(m, i) <= kSchedEps) continue;
          double p = res.power[i];
          if (ch.hop1(m, i) > 0.0)
            p = std::clamp(std::max(p, xi - 1.0 / ch.hop1(m, i)), 0.0, cfg.p_max_mbs);
          if (commit) res.power[i] = p;
          acc += x.hop1(m, i) * std::log2(1.0 + p * ch.hop1(m, i));
        }
        return acc;
      };
      double lo = 0.0, hi = xi_hi;
      for (int it = 0; it < 200 && hi - lo > 1e-18 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (apply(mid, false) < demand_prefix(m, n) ? lo : hi) = mid;
      }
      apply(hi, true);
    }
  }

  if (res.power.sum() > cfg.p_avg_mbs * c.N + 1e-9) {
    res.status = binary_hop1 ? convex::Status::Infeasible : convex::Status::MaxIter;
    res.witness = "average power budget binds below the demanded bits";
  }
  return res;
}

PowerResult optimize_powers(const Scenario& cfg, const NetworkState& state,
                            const PowerOptions& opts) {
  const Schedule x = Schedule::from_state(state);
  const EquivalentChannels ch = equivalent_channels(cfg, state);
  PowerContext c = PowerContext::make(cfg, x, ch);
  const int dim = c.dim();

  PowerResult res;
  res.power_mbs = state.power_mbs;
  res.power_relay = state.power_relay;

  // joint dual over the shared multipliers: relay components + MBS component
  KelleyMaster master;
  master.c = &c;
  master.n_components = c.M + 1;
  master.linear_term = Eigen::VectorXd::Zero(dim);

  auto evaluate = [&](const Eigen::VectorXd& theta, std::vector<Cut>& new_cuts,
                      Eigen::VectorXd* mbs_power_out) {
    double total = cap_term(c, theta);
    for (int m = 0; m < c.M; ++m) {
      const Eigen::MatrixXd w = w_matrix(c, theta, m);
      const RelayInner inner = relay_inner(c, m, w);
      Cut cut;
      cut.component = m;
      cut.value = inner.value;
      cut.grad = Eigen::VectorXd::Zero(dim);
      for (int s = 0; s < c.caus_count; ++s) {
        const auto& links = c.links[m][s];
        for (std::size_t j = 0; j < links.size(); ++j) {
          const double at = links[j].weight * inner.bits[s][j];
          cut.grad[links[j].user] += at;
          for (int n = s + c.D; n < c.N; ++n) cut.grad[c.caus_index(m, n)] -= at;
        }
      }
      cut.point = theta;
      total += inner.value;
      new_cuts.push_back(std::move(cut));
    }
    const Eigen::MatrixXd z = z_matrix(c, theta);
    const MbsInner minner = mbs_inner(c, z, 0.0);
    Cut cut;
    cut.component = c.M;
    cut.value = minner.value;
    cut.point = theta;
    cut.grad = Eigen::VectorXd::Zero(dim);
    for (int m = 0; m < c.M; ++m) {
      double acc = 0.0;
      for (int n = c.D; n < c.N; ++n) {
        acc += x.hop1(m, n - c.D) *
               std::log2(1.0 + minner.power[n - c.D] * ch.hop1(m, n - c.D));
        cut.grad[c.caus_index(m, n)] += acc;
      }
    }
    total += minner.value;
    new_cuts.push_back(std::move(cut));
    if (mbs_power_out) *mbs_power_out = minner.power;
    return total;
  };

  // feasible primal pass: hop-1 rates -> relay step -> min-power MBS step
  Eigen::MatrixXd hop1_rates(c.M, c.N);
  auto primal_pass = [&](const Eigen::VectorXd& p_mbs, double& mu_out,
                         Eigen::MatrixXd& relay_out, Eigen::VectorXd& mbs_out) {
    for (int m = 0; m < c.M; ++m)
      for (int n = 0; n < c.N; ++n)
        hop1_rates(m, n) = std::log2(1.0 + p_mbs[n] * ch.hop1(m, n));
    const RelayPowerResult relay = solve_relay_power(cfg, x, ch, hop1_rates);
    Eigen::MatrixXd demand = Eigen::MatrixXd::Zero(c.M, c.N);
    for (int m = 0; m < c.M; ++m) {
      double acc = 0.0;
      for (int n = c.D; n < c.N; ++n) {
        for (int k = 0; k < c.K; ++k) acc += x.hop2[m](k, n) * relay.bits[m](k, n);
        demand(m, n) = acc;
      }
    }
    const MbsPowerResult mbs = solve_mbs_power(cfg, x, ch, demand);
    mu_out = relay.mu;
    relay_out = relay.power;
    mbs_out = (mbs.status == convex::Status::Optimal) ? mbs.power : p_mbs;
  };

  // round 0: the plain alternation from the incoming powers
  double mu_best;
  Eigen::MatrixXd relay_best;
  Eigen::VectorXd mbs_best;
  primal_pass(state.power_mbs, mu_best, relay_best, mbs_best);
  res.trace.push_back(mu_best);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < c.K; ++k) theta[k] = 1.0 / c.K;
  Eigen::VectorXd theta_best = theta;
  double d_best = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double radius = 0.5;
  int cuts_spent = 0;

  for (int round = 1; round < opts.max_iterations && cuts_spent < opts.dual_cut_budget; ++round) {
    ++res.iterations;
    Eigen::VectorXd dual_mbs_power;
    const int chunk = 50;
    for (int j = 0; j < chunk && cuts_spent < opts.dual_cut_budget; ++j, ++cuts_spent) {
      std::vector<Cut> new_cuts;
      const double val = evaluate(theta, new_cuts, &dual_mbs_power);
      for (auto& cut : new_cuts) master.cuts.push_back(std::move(cut));
      if (val < d_best - 1e-14) {
        d_best = val;
        theta_best = theta;
        radius = std::min(radius * 1.6, 1.0);
      } else {
        radius = std::max(radius * 0.7, 1e-4);
      }
      Eigen::VectorXd theta_next;
      double master_lb;
      if (!master.solve(theta_best, radius, theta_next, master_lb)) break;
      if (radius >= master.theta_box || (cuts_spent % 15 == 14)) {
        Eigen::VectorXd tmp;
        double full_lb;
        if (master.solve(theta_best, master.theta_box, tmp, full_lb)) lb = std::max(lb, full_lb);
      }
      theta = theta_next;
      if (d_best - lb <= 0.25 * opts.rel_tol * std::max(1.0, std::abs(d_best))) break;
    }

    // primal pass with the dual-guided MBS powers
    std::vector<Cut> scratch;
    Eigen::VectorXd p_guided;
    evaluate(theta_best, scratch, &p_guided);
    double mu_round;
    Eigen::MatrixXd relay_round;
    Eigen::VectorXd mbs_round;
    primal_pass(p_guided, mu_round, relay_round, mbs_round);
    const double prev = res.trace.back();
    if (mu_round > mu_best) {
      mu_best = mu_round;
      relay_best = relay_round;
      mbs_best = mbs_round;
    }
    res.trace.push_back(mu_best);
    const double denom = std::max(std::abs(prev), 1e-9);
    const bool converged_mu = std::abs(mu_best - prev) / denom <= opts.rel_tol;
    const bool converged_gap =
        d_best - lb <= 0.25 * opts.rel_tol * std::max(1.0, std::abs(d_best)) &&
        (d_best / c.N - mu_best) <= opts.rel_tol * std::max(1.0, mu_best) * c.N;
    if (converged_mu || converged_gap) break;
  }

  res.mu = mu_best;
  res.power_relay = relay_best;
  res.power_mbs = mbs_best;
  return res;
}

}  // namespace uavrelay
