// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/scheduling.hpp"

#include <algorithm>
#include <stdexcept>

#include "uavrelay/model.hpp"

namespace uavrelay {

RateTables compute_rate_tables(const Scenario& cfg, const NetworkState& state) {
  state.check_dims(cfg);
  RateTables t;
  const int m_relays = cfg.num_relays, n_slots = cfg.num_slots, k_users = cfg.num_users;
  t.hop1.resize(m_relays, n_slots);
  t.hop2.assign(m_relays, Eigen::MatrixXd(k_users, n_slots));
  for (int m = 0; m < m_relays; ++m) {
    for (int n = 0; n < n_slots; ++n) {
      t.hop1(m, n) = rate_hop1(cfg, state.power_mbs[n], state.traj_mbs.col(n),
                               state.traj_relay[m].col(n), state.beam_mbs[n]);
      for (int k = 0; k < k_users; ++k)
        t.hop2[m](k, n) = rate_hop2(cfg, state.power_relay(m, n), state.traj_relay[m].col(n),
                                    cfg.user_pos.col(k), state.beam_relay(m, n));
    }
  }
  return t;
}

Schedule Schedule::zeros(const Scenario& cfg) {
  Schedule x;
  x.hop1 = Eigen::MatrixXd::Zero(cfg.num_relays, cfg.num_slots);
  x.hop2.assign(cfg.num_relays, Eigen::MatrixXd::Zero(cfg.num_users, cfg.num_slots));
  return x;
}

void Schedule::store_into(NetworkState& state) const {
  state.sched_hop1 = hop1;
  state.sched_hop2 = hop2;
}

Schedule Schedule::from_state(const NetworkState& state) {
  Schedule x;
  x.hop1 = state.sched_hop1;
  x.hop2 = state.sched_hop2;
  return x;
}

namespace {

struct VarMap {
  int mu = 0;
  int m_relays, k_users, n_slots;
  int beta(int m, int n) const { return 1 + m * n_slots + n; }
  int a(int m, int k, int n) const {
    return 1 + m_relays * n_slots + (m * k_users + k) * n_slots + n;
  }
};

void check_tables(const Scenario& cfg, const RateTables& rates) {
  if (rates.hop1.rows() != cfg.num_relays || rates.hop1.cols() != cfg.num_slots ||
      static_cast<int>(rates.hop2.size()) != cfg.num_relays)
    throw std::invalid_argument("scheduling: rate table dimensions do not match the scenario");
  for (const auto& h : rates.hop2)
    if (h.rows() != cfg.num_users || h.cols() != cfg.num_slots)
      throw std::invalid_argument("scheduling: rate table dimensions do not match the scenario");
}

}  // namespace

convex::Program build_sched_lp(const Scenario& cfg, const RateTables& rates) {
  check_tables(cfg, rates);
  using convex::Terms;
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  VarMap v{0, M, K, N};

  convex::Program p;
  double max_rate = 0.0;
  for (const auto& h : rates.hop2) max_rate = std::max(max_rate, h.maxCoeff());
  p.add_var("mu", 0.0, std::max(max_rate, 1e-9));
  p.objective[v.mu] = 1.0;

  // beta has no use in slots whose bits could never be forwarded; a has no
  // use before the first deliverable slot (the causality window).
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n)
      p.add_var("beta[" + std::to_string(m) + "][" + std::to_string(n) + "]", 0.0,
                n < N - D ? 1.0 : 0.0);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n)
        p.add_var("a[" + std::to_string(m) + "][" + std::to_string(k) + "][" + std::to_string(n) + "]",
                  0.0, n >= D ? 1.0 : 0.0);

  // Rbar_k >= mu
  for (int k = 0; k < K; ++k) {
    Terms t{{v.mu, 1.0}};
    for (int m = 0; m < M; ++m)
      for (int n = D; n < N; ++n)
        if (rates.hop2[m](k, n) > 0.0) t.push_back({v.a(m, k, n), -rates.hop2[m](k, n) / N});
    p.linear.push_back({std::move(t), 0.0, "minrate[k=" + std::to_string(k) + "]"});
  }
  // sum_m beta <= 1 per slot
  for (int n = 0; n < N - D; ++n) {
    Terms t;
    for (int m = 0; m < M; ++m) t.push_back({v.beta(m, n), 1.0});
    p.linear.push_back({std::move(t), 1.0, "hop1sum[n=" + std::to_string(n) + "]"});
  }
  // sum_k a <= 1 per (m, n) and sum_m a <= 1 per (k, n)
  for (int n = D; n < N; ++n) {
    for (int m = 0; m < M; ++m) {
      Terms t;
      for (int k = 0; k < K; ++k) t.push_back({v.a(m, k, n), 1.0});
      p.linear.push_back({std::move(t), 1.0, "hop2relay[m=" + std::to_string(m) + "]"});
    }
    for (int k = 0; k < K; ++k) {
      Terms t;
      for (int m = 0; m < M; ++m) t.push_back({v.a(m, k, n), 1.0});
      p.linear.push_back({std::move(t), 1.0, "hop2user[k=" + std::to_string(k) + "]"});
    }
  }
  // causality prefix constraints
  for (int m = 0; m < M; ++m) {
    for (int n = D; n < N; ++n) {
      Terms t;
      for (int i = 0; i <= n - D; ++i)
        if (rates.hop1(m, i) > 0.0) t.push_back({v.beta(m, i), -rates.hop1(m, i)});
      for (int i = D; i <= n; ++i)
        for (int k = 0; k < K; ++k)
          if (rates.hop2[m](k, i) > 0.0) t.push_back({v.a(m, k, i), rates.hop2[m](k, i)});
      p.linear.push_back(
          {std::move(t), 0.0, "causality[m=" + std::to_string(m) + ",n=" + std::to_string(n) + "]"});
    }
  }
  return p;
}

ScheduleResult solve_schedule(const Scenario& cfg, const RateTables& rates) {
  const convex::Program p = build_sched_lp(cfg, rates);
  const convex::SolveReport rep = convex::solve_lp(p);
  ScheduleResult out;
  out.status = rep.status;
  out.schedule = Schedule::zeros(cfg);
  if (rep.status != convex::Status::Optimal) return out;
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots;
  VarMap v{0, M, K, N};
  out.mu = rep.x[v.mu];
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      out.schedule.hop1(m, n) = rep.x[v.beta(m, n)];
      for (int k = 0; k < K; ++k) out.schedule.hop2[m](k, n) = rep.x[v.a(m, k, n)];
    }
  return out;
}

double schedule_min_rate(const Scenario& cfg, const Schedule& x, const RateTables& rates) {
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    double sum = 0.0;
    for (int m = 0; m < M; ++m)
      for (int n = D; n < N; ++n) sum += x.hop2[m](k, n) * rates.hop2[m](k, n);
    worst = std::min(worst, sum / N);
  }
  return worst;
}

double schedule_causality_violation(const Scenario& cfg, const Schedule& x,
                                    const RateTables& rates) {
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  double worst = 0.0;
  for (int m = 0; m < M; ++m) {
    double received = 0.0, sent = 0.0;
    for (int n = D; n < N; ++n) {
      received += x.hop1(m, n - D) * rates.hop1(m, n - D);
      for (int k = 0; k < K; ++k) sent += x.hop2[m](k, n) * rates.hop2[m](k, n);
      worst = std::max(worst, sent - received);
    }
  }
  return worst;
}

namespace {

// Depth-first LP-based branch and bound over the binary schedule space.
// Nodes are bound boxes on the scheduling variables; the relaxed LP value
// prunes dominated subtrees. Stops early when `good_enough` is reached or
// the node budget runs out, returning the best incumbent found.
bool lp_branch_and_bound(const Scenario& cfg, const RateTables& rates, double good_enough,
                         double incumbent_mu, Schedule& out) {
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots;
  convex::Program p = build_sched_lp(cfg, rates);
  // tighten the causality rows by a hair so LP round-off cannot surface as a
  // violation once a solution is snapped to {0,1}
  for (auto& c : p.linear)
    if (c.tag.rfind("causality", 0) == 0) c.rhs -= 1e-8;
  VarMap v{0, M, K, N};
  const int first = 1;            // scheduling block starts after mu
  const int last = p.num_vars();

  struct Node {
    std::vector<std::pair<int, double>> pins;  // (var, value)
  };
  std::vector<Node> stack{{}};
  int budget = std::max(64, std::min(4000, 300000 / std::max(1, last)));
  bool found = false;

  while (!stack.empty() && budget-- > 0) {
    Node node = std::move(stack.back());
    stack.pop_back();
    for (int j = first; j < last; ++j) {  // reset and apply pins
      p.lb[j] = 0.0;
      p.ub[j] = 1.0;
    }
    {  // rebuild the structural zero-support pins
      const int D = cfg.delay_slots;
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
          if (n >= N - D) p.ub[v.beta(m, n)] = 0.0;
          for (int k = 0; k < K; ++k)
            if (n < D) p.ub[v.a(m, k, n)] = 0.0;
        }
    }
    for (const auto& [j, val] : node.pins) p.lb[j] = p.ub[j] = val;

    const convex::SolveReport rep = convex::solve_lp(p);
    if (rep.status != convex::Status::Optimal) continue;
    if (rep.objective <= incumbent_mu + 1e-10) continue;  // dominated subtree

    int frac = -1;
    double frac_score = 1e-6;
    for (int j = first; j < last; ++j) {
      const double score = std::min(rep.x[j], 1.0 - rep.x[j]);
      if (score > frac_score) {
        frac_score = score;
        frac = j;
      }
    }
    if (frac < 0) {
      // binary leaf: pin stragglers and verify exactly
      Node leaf = node;
      for (int j = first; j < last; ++j)
        if (p.lb[j] < p.ub[j]) leaf.pins.push_back({j, rep.x[j] > 0.5 ? 1.0 : 0.0});
      for (const auto& [j, val] : leaf.pins) p.lb[j] = p.ub[j] = val;
      const convex::SolveReport fin = convex::solve_lp(p);
      if (fin.status != convex::Status::Optimal) continue;
      Schedule cand = Schedule::zeros(cfg);
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
          cand.hop1(m, n) = fin.x[v.beta(m, n)] > 0.5 ? 1.0 : 0.0;
          for (int k = 0; k < K; ++k)
            cand.hop2[m](k, n) = fin.x[v.a(m, k, n)] > 0.5 ? 1.0 : 0.0;
        }
      const double mu = schedule_min_rate(cfg, cand, rates);
      if (mu > incumbent_mu && schedule_causality_violation(cfg, cand, rates) <= 1e-9) {
        incumbent_mu = mu;
        out = cand;
        found = true;
        if (incumbent_mu >= good_enough) break;
      }
      continue;
    }
    // depth-first, nearer bound explored first
    const double up = rep.x[frac] >= 0.5 ? 1.0 : 0.0;
    Node other = node;
    other.pins.push_back({frac, 1.0 - up});
    stack.push_back(std::move(other));
    node.pins.push_back({frac, up});
    stack.push_back(std::move(node));
  }
  return found;
}

// Greedy repair: walking forward per relay, drop hop-2 assignments that would
// transmit more than the binary hop-1 prefix has delivered.
void repair_causality(const Scenario& cfg, Schedule& x, const RateTables& rates) {
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  for (int m = 0; m < M; ++m) {
    double balance = 0.0;
    for (int n = D; n < N; ++n) {
      balance += x.hop1(m, n - D) * rates.hop1(m, n - D);
      for (int k = 0; k < K; ++k) {
        if (x.hop2[m](k, n) <= 0.0) continue;
        const double bits = rates.hop2[m](k, n);
        if (bits > balance + 1e-12) {
          x.hop2[m](k, n) = 0.0;
        } else {
          balance -= bits;
        }
      }
    }
  }
}

// Local improvement on a binary schedule. Acceptance compares the ascending
// per-user bit vector lexicographically, which lets bits flow from rich users
// to poor ones even when the minimum itself moves only at the end of a chain.
void lex_local_search(const Scenario& cfg, const RateTables& rates, Schedule& x) {
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  auto user_bits = [&](const Schedule& s) {
    Eigen::VectorXd bits = Eigen::VectorXd::Zero(K);
    for (int k = 0; k < K; ++k)
      for (int m = 0; m < M; ++m)
        for (int n = D; n < N; ++n) bits[k] += s.hop2[m](k, n) * rates.hop2[m](k, n);
    std::sort(bits.data(), bits.data() + K);
    return bits;
  };
  auto lex_better = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int i = 0; i < K; ++i) {
      if (a[i] > b[i] + 1e-12) return true;
      if (a[i] < b[i] - 1e-12) return false;
    }
    return false;
  };
  auto user_busy_elsewhere = [&](const Schedule& s, int m, int k, int n) {
    for (int j = 0; j < M; ++j)
      if (j != m && s.hop2[j](k, n) > 0.0) return true;
    return false;
  };

  Eigen::VectorXd incumbent = user_bits(x);
  for (int pass = 0; pass < 40; ++pass) {
    bool improved = false;
    auto try_commit = [&](Schedule& trial) {
      if (schedule_causality_violation(cfg, trial, rates) > 1e-12) return false;
      Eigen::VectorXd bits = user_bits(trial);
      if (!lex_better(bits, incumbent)) return false;
      x = trial;
      incumbent = std::move(bits);
      improved = true;
      return true;
    };
    // single-slot reassignments (including clearing)
    for (int n = D; n < N; ++n)
      for (int m = 0; m < M; ++m)
        for (int k = -1; k < K; ++k) {
          Schedule trial = x;
          trial.hop2[m].col(n).setZero();
          if (k >= 0) {
            if (user_busy_elsewhere(trial, m, k, n)) continue;
            trial.hop2[m](k, n) = 1.0;
          }
          try_commit(trial);
        }
    // pairwise user swaps on the same relay
    for (int m = 0; m < M; ++m)
      for (int n1 = D; n1 < N; ++n1)
        for (int n2 = n1 + 1; n2 < N; ++n2) {
          int k1 = -1, k2 = -1;
          for (int k = 0; k < K; ++k) {
            if (x.hop2[m](k, n1) > 0.0) k1 = k;
            if (x.hop2[m](k, n2) > 0.0) k2 = k;
          }
          if (k1 == k2) continue;
          Schedule trial = x;
          trial.hop2[m].col(n1).setZero();
          trial.hop2[m].col(n2).setZero();
          if (k2 >= 0 && !user_busy_elsewhere(trial, m, k2, n1)) trial.hop2[m](k2, n1) = 1.0;
          if (k1 >= 0 && !user_busy_elsewhere(trial, m, k1, n2)) trial.hop2[m](k1, n2) = 1.0;
          try_commit(trial);
        }
    // hop-1 reassignments enlarge a relay's causality budget
    for (int n = 0; n < N - D; ++n)
      for (int m = -1; m < M; ++m) {
        Schedule trial = x;
        trial.hop1.col(n).setZero();
        if (m >= 0) trial.hop1(m, n) = 1.0;
        repair_causality(cfg, trial, rates);
        try_commit(trial);
      }
    if (!improved) break;
  }
}

}  // namespace

BinarizeResult binarize_schedule(const Scenario& cfg, const Schedule& relaxed,
                                 const RateTables& rates, double eps_bin) {
  check_tables(cfg, rates);
  const int M = cfg.num_relays, K = cfg.num_users, N = cfg.num_slots, D = cfg.delay_slots;
  const double mu_relaxed = schedule_min_rate(cfg, relaxed, rates);

  BinarizeResult out;
  out.schedule = Schedule::zeros(cfg);

  // an already-binary feasible schedule passes through untouched
  auto is_binary = [](const Eigen::MatrixXd& m) {
    return ((m.array() - 0.0).abs() < 1e-12 || (m.array() - 1.0).abs() < 1e-12).all();
  };
  bool binary_input = is_binary(relaxed.hop1);
  for (const auto& a : relaxed.hop2) binary_input = binary_input && is_binary(a);
  if (binary_input && schedule_causality_violation(cfg, relaxed, rates) <= 1e-12) {
    out.schedule = relaxed;
    out.mu = mu_relaxed;
    return out;
  }

  // hop 1: the relay with the largest fractional weight wins the slot
  for (int n = 0; n < N; ++n) {
    int best = -1;
    for (int m = 0; m < M; ++m)
      if (relaxed.hop1(m, n) > 1e-9 && (best < 0 || relaxed.hop1(m, n) > relaxed.hop1(best, n)))
        best = m;
    if (best >= 0) out.schedule.hop1(best, n) = 1.0;
  }
  // hop 2: greedy by weight under the one-relay / one-user slot rules
  for (int n = D; n < N; ++n) {
    std::vector<std::pair<double, std::pair<int, int>>> cand;
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k)
        if (relaxed.hop2[m](k, n) > 1e-9) cand.push_back({relaxed.hop2[m](k, n), {m, k}});
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::vector<bool> relay_used(M, false), user_used(K, false);
    for (const auto& [w, mk] : cand) {
      const auto [m, k] = mk;
      if (relay_used[m] || user_used[k]) continue;
      out.schedule.hop2[m](k, n) = 1.0;
      relay_used[m] = true;
      user_used[k] = true;
    }
  }
  repair_causality(cfg, out.schedule, rates);

  lex_local_search(cfg, rates, out.schedule);
  out.mu = schedule_min_rate(cfg, out.schedule, rates);

  // Escalation: when slot-wise rounding misses the contract, search the
  // binary space properly with LP-bounded branch and bound, stopping as soon
  // as the contract is met or the node budget runs out.
  if (out.mu < (1.0 - eps_bin) * mu_relaxed) {
    Schedule alt = out.schedule;
    if (lp_branch_and_bound(cfg, rates, (1.0 - eps_bin) * mu_relaxed, out.mu, alt)) {
      lex_local_search(cfg, rates, alt);
      const double alt_mu = schedule_min_rate(cfg, alt, rates);
      if (alt_mu > out.mu && schedule_causality_violation(cfg, alt, rates) <= 1e-9) {
        out.schedule = alt;
        out.mu = alt_mu;
      }
    }
  }

  out.reconstruction_gap = out.mu < (1.0 - eps_bin) * mu_relaxed - 1e-12;
  return out;
}

}  // namespace uavrelay
