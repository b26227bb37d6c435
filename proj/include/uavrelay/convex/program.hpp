// SPDX-License-Identifier: Apache-2.0
//
// Solver-agnostic description of an LP / convex program. Every constraint
// type in this file is a certified-convex class; the type itself is the
// certificate. LogRateCon is the one exception: it describes the true
// nonlinear rate constraint before linearization and is accepted only by the
// residual evaluator, never by the solvers.

#pragma once

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace uavrelay::convex {

/// Sparse linear expression: sum of coeff * x[index].
using Terms = std::vector<std::pair<int, double>>;

inline double eval_terms(const Terms& t, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (const auto& [idx, coef] : t) v += coef * x[idx];
  return v;
}

/// terms^T x <= rhs
struct LinearCon {
  Terms terms;
  double rhs = 0.0;
  std::string tag;
};

/// sum_r (rows[r]^T x + offs[r])^2 <= lin^T x + rhs
struct QuadCon {
  std::vector<Terms> rows;
  std::vector<double> offs;
  Terms lin;
  double rhs = 0.0;
  std::string tag;
};

/// (sum_r (rows[r]^T x + offs[r])^2)^(3/2) <= lin^T x + rhs.
/// Covers the propulsion cubic s >= v^3 with a single row selecting v >= 0.
struct NormCubeCon {
  std::vector<Terms> rows;
  std::vector<double> offs;
  Terms lin;
  double rhs = 0.0;
  std::string tag;
};

/// lhs^T x + lhs0 <= log2(1 + arg^T x + arg0), concave right-hand side on
/// the domain 1 + arg^T x + arg0 > 0.
struct LogAffineCon {
  Terms lhs;
  double lhs0 = 0.0;
  Terms arg;
  double arg0 = 0.0;
  std::string tag;
};

/// coef * x[t_index] <= log2(1 + gamma / (||(x[px], x[py]) - center||^2 + h2)^e)
/// Pre-linearization form of the rate constraints; residual checks only.
struct LogRateCon {
  int t_index = -1;
  double coef = 1.0;
  int px = -1, py = -1;
  Eigen::Vector2d center{0.0, 0.0};
  double gamma = 0.0;
  double h2 = 0.0;
  double e = 1.0;
  std::string tag;
};

struct Program {
  Eigen::VectorXd lb, ub;       // variable boxes
  Eigen::VectorXd objective;    // maximize objective^T x
  Eigen::VectorXd scaling;      // positive column scaling applied inside solvers
  std::vector<std::string> names;

  std::vector<LinearCon> linear;
  std::vector<QuadCon> quad;
  std::vector<NormCubeCon> cube;
  std::vector<LogAffineCon> logaffine;
  std::vector<LogRateCon> lograte;

  int num_vars() const { return static_cast<int>(lb.size()); }
  std::size_t num_constraints() const {
    return linear.size() + quad.size() + cube.size() + logaffine.size();
  }

  int add_var(const std::string& name, double lo, double hi, double scale = 1.0);
  void set_objective(int var, double coef);

  /// Convenience: a <= terms^T x <= b expands to two LinearCons.
  void add_linear_range(const Terms& terms, double lo, double hi, const std::string& tag);
};

enum class Status { Optimal, Infeasible, MaxIter, NumericalFailure };

const char* to_string(Status s);

struct SolveReport {
  Status status = Status::NumericalFailure;
  double objective = 0.0;
  Eigen::VectorXd x;
  double max_residual = std::numeric_limits<double>::infinity();  // primal, scaled
  double kkt_residual = std::numeric_limits<double>::infinity();  // stationarity, scaled
  int iterations = 0;
  double wall_ms = 0.0;
  std::string witness;  // violated-constraint description when Infeasible
};

struct SolveOptions {
  double feas_tol = 1e-8;
  double opt_tol = 1e-8;
  int max_iterations = 200000;
  std::optional<Eigen::VectorXd> warm_start;
};

/// Independent feasibility pass, outside any solver loop. Returns the worst
/// scaled violation over all constraints (boxes included) and its tag.
struct ResidualInfo {
  double max_violation = 0.0;
  std::string worst;
};
ResidualInfo evaluate_residuals(const Program& p, const Eigen::VectorXd& x);

/// Plain-text dump, one constraint per line, for external verification.
std::string dump_program(const Program& p);

/// Bounded-variable primal simplex. Requires a purely linear program.
SolveReport solve_lp(const Program& p, const SolveOptions& opts = {});

/// Log-barrier interior-point method for the certified convex classes.
/// Requires finite variable boxes; rejects programs carrying LogRateCon.
SolveReport solve_convex(const Program& p, const SolveOptions& opts = {});

}  // namespace uavrelay::convex
