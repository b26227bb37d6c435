// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/orchestrator.hpp"

#include <chrono>
#include <cmath>

#include "uavrelay/init.hpp"
#include "uavrelay/model.hpp"

namespace uavrelay {

double fairness_index(const Eigen::VectorXd& rates) {
  if (rates.size() == 0 || rates.maxCoeff() <= 0.0)
    throw std::invalid_argument("fairness_index: all rates are zero");
  const double sum = rates.sum();
  return sum * sum / (rates.size() * rates.squaredNorm());
}

double mu_upper_bound(const Scenario& cfg) {
  return std::log2(1.0 + cfg.p_max_relay * cfg.rho0_relay() * (cfg.beam_max + 1.0) /
                             (cfg.noise_w * std::pow(cfg.alt_relay_m, cfg.pathloss_exp)));
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double safe_fairness(const Scenario& cfg, const NetworkState& s) {
  const Eigen::VectorXd rates = user_rates(cfg, s);
  if (rates.maxCoeff() <= 0.0) return 0.0;
  return fairness_index(rates);
}

void record(std::vector<TraceRow>* trace, const Scenario& cfg, const NetworkState& s, int outer,
            int inner, const std::string& block, Clock::time_point t0) {
  if (!trace) return;
  TraceRow row;
  row.outer = outer;
  row.inner = inner;
  row.block = block;
  row.mu = min_user_rate(cfg, s);
  row.fairness = safe_fairness(cfg, s);
  row.max_residual = constraint_residuals(cfg, s).max_scaled();
  row.wall_ms = ms_since(t0);
  trace->push_back(std::move(row));
}

}  // namespace

InnerResult algorithm1(const Scenario& cfg, const NetworkState& start, const BcdOptions& opts,
                       int outer_index, std::vector<TraceRow>* trace) {
  const auto t0 = Clock::now();
  InnerResult res;
  res.state = start;
  res.mu = min_user_rate(cfg, res.state);

  double mu_prev = res.mu;
  for (int j = 0; j < opts.max_inner; ++j) {
    ++res.iterations;

    // (i) TDMA scheduling
    {
      const RateTables rates = compute_rate_tables(cfg, res.state);
      const ScheduleResult sched = solve_schedule(cfg, rates);
      if (sched.status != convex::Status::Optimal) {
        res.status = sched.status;
        return res;
      }
      const double mu_before = schedule_min_rate(cfg, Schedule::from_state(res.state), rates);
      if (sched.mu >= mu_before - 1e-12) sched.schedule.store_into(res.state);
      record(trace, cfg, res.state, outer_index, j, "schedule", t0);
    }

    // (ii) trajectories
    {
      const TrajResult traj = solve_trajectories(cfg, res.state, opts.traj);
      if (traj.status != convex::Status::Optimal &&
          traj.status != convex::Status::MaxIter) {
        res.status = traj.status;
        return res;
      }
      if (traj.mu >= min_user_rate(cfg, res.state) - 1e-12) {
        res.state.traj_mbs = traj.q_mbs;
        res.state.traj_relay = traj.q_relay;
      }
      record(trace, cfg, res.state, outer_index, j, "trajectory", t0);
    }

    // (iii) beamwidths
    if (opts.adapt_beams) {
      const SlpResult beam = solve_beamwidths(cfg, res.state, opts.beam);
      if (beam.status == convex::Status::Optimal &&
          beam.mu >= min_user_rate(cfg, res.state) - 1e-12) {
        res.state.beam_mbs = beam.beam_mbs;
        res.state.beam_relay = beam.beam_relay;
      }
      record(trace, cfg, res.state, outer_index, j, "beamwidth", t0);
    }

    res.mu = min_user_rate(cfg, res.state);
    const double denom = std::max(mu_prev, 1e-9);
    if (std::abs(res.mu - mu_prev) / denom <= opts.rel_tol) break;
    mu_prev = res.mu;
  }
  return res;
}

SolveSummary algorithm3(const Scenario& cfg, const BcdOptions& opts) {
  const auto t0 = Clock::now();
  cfg.validate();

  SolveSummary out;
  out.state = init_state(cfg);
  out.state.beam_mbs.setConstant(opts.frozen_beam);
  out.state.beam_relay.setConstant(opts.frozen_beam);

  // uniform starting powers on the slots that can carry traffic
  for (int n = 0; n < cfg.num_slots; ++n) {
    if (n < cfg.num_slots - cfg.delay_slots) out.state.power_mbs[n] = cfg.p_avg_mbs;
    if (n >= cfg.delay_slots) out.state.power_relay.col(n).setConstant(cfg.p_avg_relay);
  }

  double mu_prev = min_user_rate(cfg, out.state);
  for (int k = 0; k < opts.max_outer; ++k) {
    ++out.outer_iterations;

    const InnerResult inner = algorithm1(cfg, out.state, opts, k, &out.trace);
    if (inner.status != convex::Status::Optimal) {
      out.status = inner.status;
      break;
    }
    if (inner.mu >= min_user_rate(cfg, out.state) - 1e-12) out.state = inner.state;

    const PowerResult power = optimize_powers(cfg, out.state, opts.power);
    NetworkState cand = out.state;
    cand.power_mbs = power.power_mbs;
    cand.power_relay = power.power_relay;
    if (min_user_rate(cfg, cand) >= min_user_rate(cfg, out.state) - 1e-12 &&
        constraint_residuals(cfg, cand).feasible(1e-6)) {
      out.state = cand;
    }
    record(&out.trace, cfg, out.state, k, -1, "power", t0);

    out.mu = min_user_rate(cfg, out.state);
    out.outer_mu.push_back(out.mu);
    const double denom = std::max(mu_prev, 1e-9);
    if (k > 0 && std::abs(out.mu - mu_prev) / denom <= opts.rel_tol) break;
    mu_prev = out.mu;
  }

  out.mu = min_user_rate(cfg, out.state);
  out.fairness = safe_fairness(cfg, out.state);

  // the schedule handed to the outside world is binary
  const RateTables rates = compute_rate_tables(cfg, out.state);
  const BinarizeResult bin =
      binarize_schedule(cfg, Schedule::from_state(out.state), rates, opts.eps_bin);
  out.binary_schedule = bin.schedule;
  out.mu_binary = bin.mu;
  out.reconstruction_gap = bin.reconstruction_gap;
  out.binary_state = out.state;
  bin.schedule.store_into(out.binary_state);

  out.wall_ms = ms_since(t0);
  return out;
}

}  // namespace uavrelay
