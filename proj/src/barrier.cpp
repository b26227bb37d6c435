// SPDX-License-Identifier: Apache-2.0
//
// Log-barrier interior-point solver over the certified convex constraint
// classes (linear, quadratic-norm, norm-cubed epigraph, log-affine rate).
// Newton systems are solved in augmented form
//     [ H + D  J^T ] [dz]   [-grad]
//     [ J     -S^2 ] [ y] = [  0  ]
// which keeps the system sparse even when constraint gradients are dense,
// and is quasi-definite, so an unpivoted sparse LDL^T factorization applies.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "uavrelay/convex/program.hpp"

namespace uavrelay::convex {

namespace {

constexpr double kLn2 = 0.6931471805599453;

struct ScaledCon {
  enum class Kind { Linear, Quad, Cube, LogAffine } kind;
  // linear: terms/rhs; quad & cube: rows/offs/lin/rhs; logaffine: lhs=terms/lhs0=rhs_off, arg
  Terms terms;
  double rhs = 0.0;
  std::vector<Terms> rows;
  std::vector<double> offs;
  Terms lin;
  Terms arg;
  double arg0 = 0.0;
  const std::string* tag = nullptr;
};

Terms scale_terms(const Terms& t, const Eigen::VectorXd& s) {
  Terms out = t;
  for (auto& [i, c] : out) c *= s[i];
  return out;
}

class BarrierSolver {
 public:
  BarrierSolver(const Program& p, const SolveOptions& opts) : prog_(p), opts_(opts) { build(); }

  // Early-stop predicate evaluated on the unscaled x after every centering
  // stage; used by the feasibility phase.
  std::function<bool(const Eigen::VectorXd&)> stage_callback;

  SolveReport run() {
    const auto t_start = std::chrono::steady_clock::now();
    SolveReport rep;

    if (trivially_infeasible_) {
      rep.status = Status::Infeasible;
      rep.witness = "constant infeasible constraint: " + *trivially_infeasible_;
      rep.wall_ms = elapsed_ms(t_start);
      return rep;
    }

    Eigen::VectorXd z = initial_point();
    Eigen::VectorXd slack(num_cons_);
    if (!eval_slacks(z, slack) || (num_cons_ > 0 && slack.minCoeff() < 1e-9)) {
      if (!find_interior(z)) {
        rep.status = Status::Infeasible;
        rep.witness = infeasibility_witness(z);
        rep.x = unscale(z);
        rep.iterations = newton_steps_;
        rep.wall_ms = elapsed_ms(t_start);
        return rep;
      }
    }

    const double m_total = static_cast<double>(num_cons_) + 2.0 * nv_;
    const double t_cap = 1e12;
    double t = std::max(1.0, m_total / std::max(1.0, std::abs(cmin_.dot(z))));

    // z_done / t_done always hold the last fully centered stage; a failure in
    // a later stage degrades the certified gap instead of the solution.
    Eigen::VectorXd z_done = z;
    double t_done = 0.0;
    bool stage_failed = false;
    while (true) {
      if (!center(t, z)) {
        stage_failed = true;
        break;
      }
      z_done = z;
      t_done = t;
      if (stage_callback && stage_callback(unscale(z))) break;
      const double gap_target =
          std::max(1e-12, 0.1 * opts_.opt_tol * std::max(1.0, std::abs(cmin_.dot(z))));
      if (m_total / t <= gap_target || t >= t_cap) break;
      t = std::min(t * 10.0, t_cap);
    }

    if (t_done > 0.0) z = z_done;
    rep.x = unscale(z);
    rep.iterations = newton_steps_;
    rep.objective = prog_.objective.dot(rep.x);
    const auto res = evaluate_residuals(prog_, rep.x);
    rep.max_residual = res.max_violation;
    rep.kkt_residual = t_done > 0.0 ? kkt_residual(t_done, z) : kkt_residual(t, z);
    const double gap = t_done > 0.0 ? m_total / t_done : std::numeric_limits<double>::infinity();
    const double gap_ok = 1e-6 * std::max(1.0, std::abs(cmin_.dot(z)));
    if (newton_steps_ >= opts_.max_iterations)
      rep.status = Status::MaxIter;
    else if (res.max_violation > 1e-6 || (stage_failed && gap > gap_ok))
      rep.status = Status::NumericalFailure;
    else
      rep.status = Status::Optimal;
    rep.wall_ms = elapsed_ms(t_start);
    return rep;
  }

 private:
  const Program& prog_;
  SolveOptions opts_;

  int nv_ = 0;
  int num_cons_ = 0;
  std::vector<bool> pinned_;        // lb == ub: the variable is a constant
  Eigen::VectorXd lb_, ub_, cmin_;  // scaled boxes, scaled minimization objective
  std::vector<ScaledCon> cons_;
  int newton_steps_ = 0;
  const std::string* trivially_infeasible_ = nullptr;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool pattern_ready_ = false;

  static double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  }

  void build() {
    if (!prog_.lograte.empty())
      throw std::invalid_argument(
          "solve_convex: program carries pre-linearization rate constraints");
    nv_ = prog_.num_vars();
    lb_.resize(nv_);
    ub_.resize(nv_);
    pinned_.resize(nv_);
    for (int i = 0; i < nv_; ++i) {
      if (!std::isfinite(prog_.lb[i]) || !std::isfinite(prog_.ub[i]))
        throw std::invalid_argument("solve_convex: variable " + std::to_string(i) +
                                    " must have finite bounds");
      lb_[i] = prog_.lb[i] / prog_.scaling[i];
      ub_[i] = prog_.ub[i] / prog_.scaling[i];
      if (lb_[i] > ub_[i]) throw std::invalid_argument("solve_convex: empty variable box");
      pinned_[i] = ub_[i] - lb_[i] < 1e-14 * std::max(1.0, std::abs(ub_[i]));
    }
    cmin_ = -(prog_.objective.array() * prog_.scaling.array()).matrix();

    const Eigen::VectorXd& s = prog_.scaling;
    for (const auto& c : prog_.linear) {
      if (c.terms.empty()) {  // constant row: either vacuous or plainly infeasible
        if (c.rhs < 0.0) trivially_infeasible_ = &c.tag;
        continue;
      }
      ScaledCon sc;
      sc.kind = ScaledCon::Kind::Linear;
      sc.terms = scale_terms(c.terms, s);
      sc.rhs = c.rhs;
      sc.tag = &c.tag;
      cons_.push_back(std::move(sc));
    }
    auto add_norm = [&](const auto& c, ScaledCon::Kind kind) {
      if (c.rows.empty() && c.lin.empty()) {
        if (c.rhs < 0.0) trivially_infeasible_ = &c.tag;
        return;
      }
      ScaledCon sc;
      sc.kind = kind;
      for (const auto& r : c.rows) sc.rows.push_back(scale_terms(r, s));
      sc.offs = c.offs;
      sc.lin = scale_terms(c.lin, s);
      sc.rhs = c.rhs;
      sc.tag = &c.tag;
      cons_.push_back(std::move(sc));
    };
    for (const auto& c : prog_.quad) add_norm(c, ScaledCon::Kind::Quad);
    for (const auto& c : prog_.cube) add_norm(c, ScaledCon::Kind::Cube);
    for (const auto& c : prog_.logaffine) {
      ScaledCon sc;
      sc.kind = ScaledCon::Kind::LogAffine;
      sc.terms = scale_terms(c.lhs, s);
      sc.rhs = -c.lhs0;  // g = terms^T z - rhs - log2(1+u)
      sc.arg = scale_terms(c.arg, s);
      sc.arg0 = c.arg0;
      sc.tag = &c.tag;
      cons_.push_back(std::move(sc));
    }
    num_cons_ = static_cast<int>(cons_.size());
  }

  Eigen::VectorXd unscale(const Eigen::VectorXd& z) const {
    return (z.array() * prog_.scaling.array()).matrix();
  }

  Eigen::VectorXd initial_point() const {
    Eigen::VectorXd z(nv_);
    for (int i = 0; i < nv_; ++i) z[i] = 0.5 * (lb_[i] + ub_[i]);
    if (opts_.warm_start) {
      const Eigen::VectorXd& w = *opts_.warm_start;
      for (int i = 0; i < nv_; ++i) {
        const double margin = 1e-7 * std::max(1.0, ub_[i] - lb_[i]);
        if (ub_[i] - lb_[i] > 4.0 * margin)
          z[i] = std::clamp(w[i] / prog_.scaling[i], lb_[i] + margin, ub_[i] - margin);
      }
    }
    return z;
  }

  // g_c(z) values negated into slacks; false if outside a log domain or any
  // slack is nonpositive.
  bool eval_slacks(const Eigen::VectorXd& z, Eigen::VectorXd& slack) const {
    bool strictly = true;
    for (int c = 0; c < num_cons_; ++c) {
      const ScaledCon& sc = cons_[c];
      double g = 0.0;
      switch (sc.kind) {
        case ScaledCon::Kind::Linear:
          g = eval_terms(sc.terms, z) - sc.rhs;
          break;
        case ScaledCon::Kind::Quad: {
          double s2 = 0.0;
          for (std::size_t r = 0; r < sc.rows.size(); ++r) {
            const double v = eval_terms(sc.rows[r], z) + sc.offs[r];
            s2 += v * v;
          }
          g = s2 - eval_terms(sc.lin, z) - sc.rhs;
          break;
        }
        case ScaledCon::Kind::Cube: {
          double s2 = 0.0;
          for (std::size_t r = 0; r < sc.rows.size(); ++r) {
            const double v = eval_terms(sc.rows[r], z) + sc.offs[r];
            s2 += v * v;
          }
          g = std::pow(s2, 1.5) - eval_terms(sc.lin, z) - sc.rhs;
          break;
        }
        case ScaledCon::Kind::LogAffine: {
          const double u = eval_terms(sc.arg, z) + sc.arg0;
          if (1.0 + u <= 0.0) {
            slack[c] = -1.0;
            strictly = false;
            continue;
          }
          g = eval_terms(sc.terms, z) - sc.rhs - std::log2(1.0 + u);
          break;
        }
      }
      slack[c] = -g;
      if (!(slack[c] > 0.0)) strictly = false;
    }
    return strictly;
  }

  double merit(double t, const Eigen::VectorXd& z, const Eigen::VectorXd& slack) const {
    double phi = t * cmin_.dot(z);
    for (int c = 0; c < num_cons_; ++c) phi -= std::log(slack[c]);
    for (int i = 0; i < nv_; ++i) {
      if (pinned_[i]) continue;
      phi -= std::log(z[i] - lb_[i]) + std::log(ub_[i] - z[i]);
    }
    return phi;
  }

  // gradient of the barrier and triplets of [H J^T; J -S^2]
  void assemble(double t, const Eigen::VectorXd& z, const Eigen::VectorXd& slack,
                Eigen::VectorXd& grad, std::vector<Eigen::Triplet<double>>& trips) const {
    grad = t * cmin_;
    trips.clear();
    const int n = nv_;
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, 1e-10);
    for (int i = 0; i < n; ++i) {
      if (pinned_[i]) {
        diag[i] = 1.0;  // the Newton step never moves a pinned variable
        grad[i] = 0.0;
        continue;
      }
      const double dl = z[i] - lb_[i], du = ub_[i] - z[i];
      grad[i] += -1.0 / dl + 1.0 / du;
      diag[i] += 1.0 / (dl * dl) + 1.0 / (du * du);
    }

    std::vector<std::pair<int, double>> gbuf;
    for (int c = 0; c < num_cons_; ++c) {
      const ScaledCon& sc = cons_[c];
      const double s = slack[c];
      const double inv_s = 1.0 / s;
      gbuf.clear();
      switch (sc.kind) {
        case ScaledCon::Kind::Linear:
          for (const auto& [i, v] : sc.terms) gbuf.push_back({i, v});
          break;
        case ScaledCon::Kind::Quad: {
          for (const auto& [i, v] : sc.lin) gbuf.push_back({i, -v});
          for (std::size_t r = 0; r < sc.rows.size(); ++r) {
            const double rv = eval_terms(sc.rows[r], z) + sc.offs[r];
            for (const auto& [i, v] : sc.rows[r]) gbuf.push_back({i, 2.0 * rv * v});
            // Hessian 2 row row^T, weighted by 1/s
            for (const auto& [i, vi] : sc.rows[r])
              for (const auto& [j, vj] : sc.rows[r])
                if (i >= j && !pinned_[i] && !pinned_[j])
                  trips.emplace_back(i, j, inv_s * 2.0 * vi * vj);
          }
          break;
        }
        case ScaledCon::Kind::Cube: {
          double s2 = 0.0;
          for (std::size_t r = 0; r < sc.rows.size(); ++r) {
            const double v = eval_terms(sc.rows[r], z) + sc.offs[r];
            s2 += v * v;
          }
          const double v_norm = std::sqrt(s2);
          for (const auto& [i, v] : sc.lin) gbuf.push_back({i, -v});
          // gradient 3 v * R^T r ; Hessians 3 v R^T R + 3/v (R^T r)(R^T r)^T
          std::vector<std::pair<int, double>> rtr;
          for (std::size_t r = 0; r < sc.rows.size(); ++r) {
            const double rv = eval_terms(sc.rows[r], z) + sc.offs[r];
            for (const auto& [i, v] : sc.rows[r]) {
              gbuf.push_back({i, 3.0 * v_norm * rv * v});
              rtr.push_back({i, rv * v});
            }
            if (v_norm > 1e-12)
              for (const auto& [i, vi] : sc.rows[r])
                for (const auto& [j, vj] : sc.rows[r])
                  if (i >= j && !pinned_[i] && !pinned_[j])
                    trips.emplace_back(i, j, inv_s * 3.0 * v_norm * vi * vj);
          }
          if (v_norm > 1e-12)
            for (const auto& [i, vi] : rtr)
              for (const auto& [j, vj] : rtr)
                if (i >= j && !pinned_[i] && !pinned_[j])
                  trips.emplace_back(i, j, inv_s * 3.0 / v_norm * vi * vj);
          break;
        }
        case ScaledCon::Kind::LogAffine: {
          const double u = eval_terms(sc.arg, z) + sc.arg0;
          const double w = 1.0 / ((1.0 + u) * kLn2);
          for (const auto& [i, v] : sc.terms) gbuf.push_back({i, v});
          for (const auto& [i, v] : sc.arg) gbuf.push_back({i, -w * v});
          const double h = w / (1.0 + u);
          for (const auto& [i, vi] : sc.arg)
            for (const auto& [j, vj] : sc.arg)
              if (i >= j && !pinned_[i] && !pinned_[j])
                trips.emplace_back(i, j, inv_s * h * vi * vj);
          break;
        }
      }
      // gradient contribution (1/s) grad_g; constraint rows scaled by 1/s so
      // the dual block is -I regardless of how small the slacks get
      const int row = n + c;
      for (const auto& [i, v] : gbuf) {
        if (pinned_[i]) continue;
        grad[i] += inv_s * v;
        trips.emplace_back(row, i, inv_s * v);
      }
      trips.emplace_back(row, row, -1.0);
    }
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, diag[i]);
  }

  bool center(double t, Eigen::VectorXd& z) {
    Eigen::VectorXd slack(num_cons_), grad;
    std::vector<Eigen::Triplet<double>> trips;
    if (!eval_slacks(z, slack)) return false;

    for (int it = 0; it < 80; ++it) {
      if (++newton_steps_ > opts_.max_iterations) return false;
      assemble(t, z, slack, grad, trips);
      const int dim = nv_ + num_cons_;
      Eigen::SparseMatrix<double> K(dim, dim);
      K.setFromTriplets(trips.begin(), trips.end());
      if (!pattern_ready_) {
        ldlt_.analyzePattern(K);
        pattern_ready_ = true;
      }
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
      rhs.head(nv_) = -grad;
      Eigen::VectorXd sol;
      bool solved = false;
      double shift = 0.0;
      for (int attempt = 0; attempt < 5 && !solved; ++attempt) {
        Eigen::SparseMatrix<double> Ks = K;
        if (shift > 0.0)
          for (int i = 0; i < nv_; ++i) Ks.coeffRef(i, i) += shift;
        ldlt_.factorize(Ks);
        if (ldlt_.info() == Eigen::Success) {
          sol = ldlt_.solve(rhs);
          sol += ldlt_.solve(rhs - Ks.selfadjointView<Eigen::Lower>() * sol);
          solved = sol.allFinite() && -grad.dot(sol.head(nv_)) > 0.0;
        }
        if (!solved) shift = (shift == 0.0) ? 1e-8 : shift * 1e3;
      }
      if (!solved) return false;
      const Eigen::VectorXd dz = sol.head(nv_);
      const double dec = -grad.dot(dz);  // Newton decrement squared
      if (dec < 1e-10) return true;
      const double lambda = std::sqrt(dec);

      // fraction-to-boundary on the variable box
      double alpha = 1.0;
      for (int i = 0; i < nv_; ++i) {
        if (pinned_[i]) continue;
        if (dz[i] > 0.0) alpha = std::min(alpha, 0.995 * (ub_[i] - z[i]) / dz[i]);
        else if (dz[i] < 0.0) alpha = std::min(alpha, 0.995 * (lb_[i] - z[i]) / dz[i]);
      }

      Eigen::VectorXd z_try(nv_), slack_try(num_cons_);
      bool accepted = false;
      if (lambda <= 0.25) {
        // quadratic convergence region of the damped Newton method: the full
        // (boundary-limited) step decreases the barrier; no merit test, which
        // would drown in rounding noise at large t
        for (int bt = 0; bt < 60 && !accepted; ++bt) {
          z_try = z + alpha * dz;
          accepted = eval_slacks(z_try, slack_try);
          if (!accepted) alpha *= 0.5;
        }
      } else {
        alpha = std::min(alpha, 1.0 / (1.0 + lambda));
        const double phi0 = merit(t, z, slack);
        for (int bt = 0; bt < 60 && !accepted; ++bt) {
          z_try = z + alpha * dz;
          accepted = eval_slacks(z_try, slack_try) &&
                     merit(t, z_try, slack_try) <= phi0 - 0.25 * alpha * dec;
          if (!accepted) alpha *= 0.5;
        }
      }
      if (!accepted) return true;  // no representable progress at this scale
      z = z_try;
      slack = slack_try;
      if (lambda <= 1e-4) return true;
    }
    return true;
  }

  // Feasibility phase: minimize tau with every constraint relaxed by tau.
  bool find_interior(Eigen::VectorXd& z) {
    Program ph;  // phase-1 program over the *scaled* variables
    ph.lb = lb_;
    ph.ub = ub_;
    ph.objective = Eigen::VectorXd::Zero(nv_);
    ph.scaling = Eigen::VectorXd::Ones(nv_);
    ph.names.assign(nv_, "");

    // worst violation at the current point sets the initial tau
    Eigen::VectorXd slack(num_cons_);
    eval_slacks(z, slack);
    double worst = 0.0;
    for (int c = 0; c < num_cons_; ++c) worst = std::max(worst, -slack[c]);
    const double tau0 = worst * 1.5 + 1.0;

    const int tau = ph.add_var("tau", -2.0, tau0 * 2.0);
    ph.objective.conservativeResize(nv_ + 1);
    ph.objective[tau] = -1.0;  // maximize -tau
    ph.scaling.conservativeResize(nv_ + 1);
    ph.scaling[tau] = 1.0;

    auto relax = [&](Terms& lin_side) { lin_side.push_back({tau, 1.0}); };
    for (const auto& c : cons_) {
      switch (c.kind) {
        case ScaledCon::Kind::Linear: {
          LinearCon lc{c.terms, c.rhs, *c.tag};
          lc.terms.push_back({tau, -1.0});
          ph.linear.push_back(std::move(lc));
          break;
        }
        case ScaledCon::Kind::Quad: {
          QuadCon qc{c.rows, c.offs, c.lin, c.rhs, *c.tag};
          relax(qc.lin);
          ph.quad.push_back(std::move(qc));
          break;
        }
        case ScaledCon::Kind::Cube: {
          NormCubeCon cc{c.rows, c.offs, c.lin, c.rhs, *c.tag};
          relax(cc.lin);
          ph.cube.push_back(std::move(cc));
          break;
        }
        case ScaledCon::Kind::LogAffine: {
          LogAffineCon la{c.terms, -c.rhs, c.arg, c.arg0, *c.tag};
          la.lhs.push_back({tau, -1.0});
          ph.logaffine.push_back(std::move(la));
          break;
        }
      }
    }

    SolveOptions po;
    po.opt_tol = 1e-6;
    po.max_iterations = opts_.max_iterations;
    Eigen::VectorXd w0(nv_ + 1);
    w0.head(nv_) = z;
    w0[tau] = tau0;
    po.warm_start = w0;

    BarrierSolver inner(ph, po);
    inner.stage_callback = [tau](const Eigen::VectorXd& x) { return x[tau] < -1e-4; };
    const SolveReport rep = inner.run();
    newton_steps_ += rep.iterations;
    if (rep.x.size() == nv_ + 1 && rep.x[tau] < -1e-9) {
      z = rep.x.head(nv_);
      return true;
    }
    return false;
  }

  std::string infeasibility_witness(const Eigen::VectorXd& z) const {
    if (num_cons_ == 0) return "empty variable box";
    Eigen::VectorXd slack(num_cons_);
    eval_slacks(z, slack);
    int worst = 0;
    for (int c = 1; c < num_cons_; ++c)
      if (slack[c] < slack[worst]) worst = c;
    return "no interior point found; deepest violation at " + *cons_[worst].tag;
  }

  double kkt_residual(double t, const Eigen::VectorXd& z) const {
    Eigen::VectorXd slack(num_cons_), grad;
    std::vector<Eigen::Triplet<double>> trips;
    if (!eval_slacks(z, slack)) return std::numeric_limits<double>::infinity();
    assemble(t, z, slack, grad, trips);
    const double scale = std::max(1.0, t * cmin_.lpNorm<Eigen::Infinity>());
    return grad.lpNorm<Eigen::Infinity>() / scale;
  }
};

}  // namespace

SolveReport solve_convex(const Program& p, const SolveOptions& opts) {
  BarrierSolver s(p, opts);
  return s.run();
}

}  // namespace uavrelay::convex
