// SPDX-License-Identifier: Apache-2.0
//
// Bounded-variable two-phase primal simplex with an explicit dense basis
// inverse, periodic refactorization, and a Bland's-rule fallback against
// cycling. Intended problem sizes are a few thousand columns.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "uavrelay/convex/program.hpp"

namespace uavrelay::convex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Col {
  Terms entries;  // (row, coeff)
  double lb = 0.0, ub = 0.0;
  double cost = 0.0;   // phase-2 cost (minimization)
  bool artificial = false;
};

enum class VarState : unsigned char { Basic, AtLower, AtUpper };

class Simplex {
 public:
  Simplex(const Program& p, const SolveOptions& opts) : prog_(p), opts_(opts) { build(); }

  SolveReport run() {
    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep;
    rep.x = Eigen::VectorXd::Zero(prog_.num_vars());

    bool feasible = phase(true, rep);
    if (feasible && status_ == Status::Optimal) {
      if (phase1_value() > 1e-7 * (1.0 + bscale_)) {
        status_ = Status::Infeasible;
        rep.witness = infeasibility_witness();
      } else {
        pin_artificials();
        phase(false, rep);
      }
    }

    rep.status = status_;
    rep.iterations = total_iters_;
    if (status_ == Status::Optimal) {
      Eigen::VectorXd x(prog_.num_vars());
      for (int j = 0; j < prog_.num_vars(); ++j) x[j] = value_[j] * prog_.scaling[j];
      rep.x = x;
      rep.objective = prog_.objective.dot(x);
      const auto res = evaluate_residuals(prog_, x);
      rep.max_residual = res.max_violation;
      rep.kkt_residual = dual_residual_;
      if (res.max_violation > 1e-6) {
        rep.status = Status::NumericalFailure;
        rep.witness = "post-solve residual check failed at " + res.worst;
      }
    }
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }

 private:
  const Program& prog_;
  SolveOptions opts_;

  int m_ = 0;               // rows
  int n_struct_ = 0;        // structural columns
  std::vector<Col> cols_;   // structural + slack + artificial
  Eigen::VectorXd b_;
  double bscale_ = 1.0;

  std::vector<int> basic_;          // row -> column
  std::vector<VarState> state_;     // column state
  std::vector<double> value_;       // current value per column
  Eigen::MatrixXd binv_;            // dense basis inverse
  Status status_ = Status::Optimal;
  int total_iters_ = 0;
  double dual_residual_ = 0.0;

  void build() {
    if (!prog_.quad.empty() || !prog_.cube.empty() || !prog_.logaffine.empty() ||
        !prog_.lograte.empty())
      throw std::invalid_argument("solve_lp: program has nonlinear constraints");

    n_struct_ = prog_.num_vars();
    m_ = static_cast<int>(prog_.linear.size());
    cols_.resize(n_struct_);
    for (int j = 0; j < n_struct_; ++j) {
      cols_[j].lb = prog_.lb[j] / prog_.scaling[j];
      cols_[j].ub = prog_.ub[j] / prog_.scaling[j];
      cols_[j].cost = -prog_.objective[j] * prog_.scaling[j];  // maximize -> minimize
      if (cols_[j].lb > cols_[j].ub)
        throw std::invalid_argument("solve_lp: variable with empty box");
    }
    b_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const auto& c = prog_.linear[i];
      for (const auto& [j, v] : c.terms)
        if (v != 0.0) cols_[j].entries.push_back({i, v * prog_.scaling[j]});
      b_[i] = c.rhs;
      bscale_ = std::max(bscale_, std::abs(c.rhs));
    }
    // slack per row: row + slack == b, slack >= 0 encodes <=.
    for (int i = 0; i < m_; ++i) {
      Col s;
      s.entries = {{i, 1.0}};
      s.lb = 0.0;
      s.ub = kInf;
      cols_.push_back(std::move(s));
    }

    // Initial point: structurals at the finite bound closest to zero.
    state_.assign(cols_.size(), VarState::AtLower);
    value_.assign(cols_.size(), 0.0);
    for (int j = 0; j < n_struct_; ++j) {
      const Col& c = cols_[j];
      double v;
      if (std::isfinite(c.lb) && std::isfinite(c.ub))
        v = (std::abs(c.lb) <= std::abs(c.ub)) ? c.lb : c.ub;
      else if (std::isfinite(c.lb))
        v = c.lb;
      else if (std::isfinite(c.ub))
        v = c.ub;
      else
        v = 0.0;
      value_[j] = v;
      state_[j] = (v == c.ub && std::isfinite(c.ub)) ? VarState::AtUpper : VarState::AtLower;
    }

    // Row residuals with slacks at their nearest feasible value; artificials
    // absorb what the slack cannot.
    Eigen::VectorXd r = b_;
    for (int j = 0; j < n_struct_; ++j)
      if (value_[j] != 0.0)
        for (const auto& [i, v] : cols_[j].entries) r[i] -= v * value_[j];

    basic_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      const int slack = n_struct_ + i;
      if (r[i] >= 0.0) {
        // slack can hold the residual
        basic_[i] = slack;
        state_[slack] = VarState::Basic;
        value_[slack] = r[i];
      } else {
        value_[slack] = 0.0;
        state_[slack] = VarState::AtLower;
        Col a;
        a.entries = {{i, r[i] < 0.0 ? -1.0 : 1.0}};
        a.lb = 0.0;
        a.ub = kInf;
        a.artificial = true;
        cols_.push_back(a);
        const int aj = static_cast<int>(cols_.size()) - 1;
        basic_[i] = aj;
        state_.push_back(VarState::Basic);
        value_.push_back(std::abs(r[i]));
      }
    }
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    // artificial columns are -1 on their row; adjust inverse accordingly
    for (int i = 0; i < m_; ++i)
      if (cols_[basic_[i]].artificial && cols_[basic_[i]].entries[0].second < 0.0)
        binv_(i, i) = -1.0;
  }

  double cost_of(int j, bool phase1) const {
    if (phase1) return cols_[j].artificial ? 1.0 : 0.0;
    return cols_[j].artificial ? 0.0 : cols_[j].cost;
  }

  double phase1_value() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      if (cols_[basic_[i]].artificial) s += value_[basic_[i]];
    return s;
  }

  std::string infeasibility_witness() const {
    for (int i = 0; i < m_; ++i)
      if (cols_[basic_[i]].artificial && value_[basic_[i]] > 1e-9)
        return "unsatisfiable constraint: " + prog_.linear[i].tag;
    return "infeasible";
  }

  void pin_artificials() {
    for (auto& c : cols_)
      if (c.artificial) c.ub = 0.0;
  }

  Eigen::VectorXd ftran(int j) const {  // B^-1 * A_j
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m_);
    for (const auto& [i, v] : cols_[j].entries) alpha += v * binv_.col(i);
    return alpha;
  }

  void refactorize() {
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (const auto& [row, v] : cols_[basic_[i]].entries) basis(row, i) = v;
    binv_ = basis.partialPivLu().inverse();
    recompute_basics();
  }

  void recompute_basics() {
    Eigen::VectorXd rhs = b_;
    for (std::size_t j = 0; j < cols_.size(); ++j)
      if (state_[j] != VarState::Basic && value_[j] != 0.0)
        for (const auto& [i, v] : cols_[j].entries) rhs[i] -= v * value_[j];
    const Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < m_; ++i) value_[basic_[i]] = xb[i];
  }

  // Returns true when a feasible/optimal basis was reached.
  bool phase(bool phase1, SolveReport&) {
    const double dtol = 1e-9;
    const int bland_after = 400;
    int stalled = 0;
    int since_refactor = 0;

    for (; total_iters_ < opts_.max_iterations; ++total_iters_) {
      if (phase1 && phase1_value() <= 1e-12 * (1.0 + bscale_)) return true;

      // pricing
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost_of(basic_[i], phase1);
      const Eigen::VectorXd y = binv_.transpose() * cb;

      const bool bland = stalled > bland_after;
      int enter = -1;
      double best = dtol;
      int dir = 0;
      double worst_dual = 0.0;
      for (std::size_t j = 0; j < cols_.size(); ++j) {
        if (state_[j] == VarState::Basic) continue;
        if (cols_[j].lb == cols_[j].ub) continue;
        double d = cost_of(static_cast<int>(j), phase1);
        for (const auto& [i, v] : cols_[j].entries) d -= y[i] * v;
        double viol = 0.0;
        int candidate_dir = 0;
        if (state_[j] == VarState::AtLower && d < -dtol) {
          viol = -d;
          candidate_dir = +1;
        } else if (state_[j] == VarState::AtUpper && d > dtol) {
          viol = d;
          candidate_dir = -1;
        }
        worst_dual = std::max(worst_dual, viol);
        if (candidate_dir != 0) {
          if (bland) {
            enter = static_cast<int>(j);
            dir = candidate_dir;
            break;
          }
          if (viol > best) {
            best = viol;
            enter = static_cast<int>(j);
            dir = candidate_dir;
          }
        }
      }
      if (enter < 0) {
        dual_residual_ = phase1 ? 0.0 : worst_dual;
        return true;  // optimal for this phase
      }

      const Eigen::VectorXd alpha = ftran(enter);

      // ratio test: entering moves t >= 0 in direction `dir`
      double t_max = cols_[enter].ub - cols_[enter].lb;  // own bound flip distance
      int leave_row = -1;
      bool leave_at_upper = false;
      const double ptol = 1e-10;
      for (int i = 0; i < m_; ++i) {
        const double a = dir * alpha[i];
        if (std::abs(a) < ptol) continue;
        const Col& bc = cols_[basic_[i]];
        const double xv = value_[basic_[i]];
        // basic value changes by -a * t
        if (a > 0.0 && std::isfinite(bc.lb)) {
          const double t = (xv - bc.lb) / a;
          if (t < t_max - 1e-12 || (t < t_max + 1e-12 && leave_row >= 0 &&
                                    std::abs(alpha[i]) > std::abs(alpha[leave_row]))) {
            t_max = std::max(t, 0.0);
            leave_row = i;
            leave_at_upper = false;
          }
        } else if (a < 0.0 && std::isfinite(bc.ub)) {
          const double t = (bc.ub - xv) / (-a);
          if (t < t_max - 1e-12 || (t < t_max + 1e-12 && leave_row >= 0 &&
                                    std::abs(alpha[i]) > std::abs(alpha[leave_row]))) {
            t_max = std::max(t, 0.0);
            leave_row = i;
            leave_at_upper = true;
          }
        }
      }

      if (!std::isfinite(t_max)) {
        status_ = Status::NumericalFailure;
        return false;  // unbounded; does not occur with boxed programs
      }
      stalled = (t_max < 1e-12) ? stalled + 1 : 0;

      // apply the step
      value_[enter] += dir * t_max;
      for (int i = 0; i < m_; ++i) value_[basic_[i]] -= dir * t_max * alpha[i];

      if (leave_row < 0) {
        // bound flip
        state_[enter] = (dir > 0) ? VarState::AtUpper : VarState::AtLower;
        continue;
      }

      const int leave = basic_[leave_row];
      value_[leave] = leave_at_upper ? cols_[leave].ub : cols_[leave].lb;
      state_[leave] = leave_at_upper ? VarState::AtUpper : VarState::AtLower;
      basic_[leave_row] = enter;
      state_[enter] = VarState::Basic;

      // pivot update of the dense inverse
      const double piv = alpha[leave_row];
      if (std::abs(piv) < 1e-11) {
        refactorize();
        since_refactor = 0;
        continue;
      }
      Eigen::RowVectorXd pivot_row = binv_.row(leave_row) / piv;
      for (int i = 0; i < m_; ++i) {
        if (i == leave_row) continue;
        const double f = alpha[i];
        if (f != 0.0) binv_.row(i) -= f * pivot_row;
      }
      binv_.row(leave_row) = pivot_row;

      if (++since_refactor >= 150) {
        refactorize();
        since_refactor = 0;
      }
    }
    status_ = Status::MaxIter;
    return false;
  }
};

}  // namespace

SolveReport solve_lp(const Program& p, const SolveOptions& opts) {
  Simplex s(p, opts);
  return s.run();
}

}  // namespace uavrelay::convex
