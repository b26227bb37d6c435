// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/convex/program.hpp"

#include <cmath>
#include <sstream>

namespace uavrelay::convex {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::MaxIter: return "MaxIter";
    case Status::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

int Program::add_var(const std::string& name, double lo, double hi, double scale) {
  const int idx = num_vars();
  lb.conservativeResize(idx + 1);
  ub.conservativeResize(idx + 1);
  objective.conservativeResize(idx + 1);
  scaling.conservativeResize(idx + 1);
  lb[idx] = lo;
  ub[idx] = hi;
  objective[idx] = 0.0;
  scaling[idx] = scale;
  names.push_back(name);
  return idx;
}

void Program::set_objective(int var, double coef) { objective[var] = coef; }

void Program::add_linear_range(const Terms& terms, double lo, double hi, const std::string& tag) {
  if (std::isfinite(hi)) linear.push_back({terms, hi, tag});
  if (std::isfinite(lo)) {
    Terms neg = terms;
    for (auto& [i, c] : neg) c = -c;
    linear.push_back({std::move(neg), -lo, tag});
  }
}

namespace {

double quad_lhs(const std::vector<Terms>& rows, const std::vector<double>& offs,
                const Eigen::VectorXd& x) {
  double s = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = eval_terms(rows[r], x) + offs[r];
    s += v * v;
  }
  return s;
}

}  // namespace

ResidualInfo evaluate_residuals(const Program& p, const Eigen::VectorXd& x) {
  ResidualInfo info;
  auto consider = [&](double violation, const std::string& tag) {
    if (violation > info.max_violation) {
      info.max_violation = violation;
      info.worst = tag;
    }
  };

  for (int i = 0; i < p.num_vars(); ++i) {
    const double scale = std::max(1.0, std::max(std::abs(p.lb[i]), std::abs(p.ub[i])));
    if (std::isfinite(p.lb[i])) consider((p.lb[i] - x[i]) / scale, "box:" + p.names[i]);
    if (std::isfinite(p.ub[i])) consider((x[i] - p.ub[i]) / scale, "box:" + p.names[i]);
  }
  for (const auto& c : p.linear)
    consider((eval_terms(c.terms, x) - c.rhs) / std::max(1.0, std::abs(c.rhs)), c.tag);
  for (const auto& c : p.quad) {
    const double rhs = eval_terms(c.lin, x) + c.rhs;
    consider((quad_lhs(c.rows, c.offs, x) - rhs) / std::max(1.0, std::abs(rhs)), c.tag);
  }
  for (const auto& c : p.cube) {
    const double rhs = eval_terms(c.lin, x) + c.rhs;
    consider((std::pow(quad_lhs(c.rows, c.offs, x), 1.5) - rhs) / std::max(1.0, std::abs(rhs)),
             c.tag);
  }
  for (const auto& c : p.logaffine) {
    const double u = eval_terms(c.arg, x) + c.arg0;
    const double lhs = eval_terms(c.lhs, x) + c.lhs0;
    if (1.0 + u <= 0.0) {
      consider(std::abs(u), c.tag + ":domain");
    } else {
      consider(lhs - std::log2(1.0 + u), c.tag);
    }
  }
  for (const auto& c : p.lograte) {
    const Eigen::Vector2d q(x[c.px], x[c.py]);
    const double d2 = (q - c.center).squaredNorm() + c.h2;
    const double rate = std::log2(1.0 + c.gamma / std::pow(d2, c.e));
    consider(c.coef * x[c.t_index] - rate, c.tag);
  }
  return info;
}

namespace {

void print_terms(std::ostringstream& os, const Terms& t, const Program& p) {
  bool first = true;
  for (const auto& [i, c] : t) {
    if (!first) os << (c >= 0 ? " + " : " - ");
    else if (c < 0) os << "-";
    os << std::abs(c) << "*" << (p.names[i].empty() ? "x" + std::to_string(i) : p.names[i]);
    first = false;
  }
  if (first) os << "0";
}

}  // namespace

std::string dump_program(const Program& p) {
  std::ostringstream os;
  os.precision(17);
  os << "# maximize objective subject to constraints; one item per line\n";
  for (int i = 0; i < p.num_vars(); ++i)
    os << "var " << (p.names[i].empty() ? "x" + std::to_string(i) : p.names[i]) << " in ["
       << p.lb[i] << ", " << p.ub[i] << "]\n";
  os << "max ";
  Terms obj;
  for (int i = 0; i < p.num_vars(); ++i)
    if (p.objective[i] != 0.0) obj.push_back({i, p.objective[i]});
  print_terms(os, obj, p);
  os << "\n";
  for (const auto& c : p.linear) {
    os << "lin: ";
    print_terms(os, c.terms, p);
    os << " <= " << c.rhs << "  # " << c.tag << "\n";
  }
  auto print_norm = [&](const auto& c) {
    os << "(";
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
      if (r) os << " + ";
      os << "(";
      print_terms(os, c.rows[r], p);
      if (c.offs[r] != 0.0) os << " + " << c.offs[r];
      os << ")^2";
    }
    os << ")";
  };
  for (const auto& c : p.quad) {
    os << "quad: ";
    print_norm(c);
    os << " <= ";
    print_terms(os, c.lin, p);
    os << " + " << c.rhs << "  # " << c.tag << "\n";
  }
  for (const auto& c : p.cube) {
    os << "cube: ";
    print_norm(c);
    os << "^(3/2) <= ";
    print_terms(os, c.lin, p);
    os << " + " << c.rhs << "  # " << c.tag << "\n";
  }
  for (const auto& c : p.logaffine) {
    os << "log: ";
    print_terms(os, c.lhs, p);
    os << " + " << c.lhs0 << " <= log2(1 + ";
    print_terms(os, c.arg, p);
    os << " + " << c.arg0 << ")  # " << c.tag << "\n";
  }
  for (const auto& c : p.lograte) {
    os << "lograte: " << c.coef << "*x" << c.t_index << " <= log2(1 + " << c.gamma
       << " / ((x" << c.px << ",x" << c.py << ") - (" << c.center.x() << "," << c.center.y()
       << "))^2 + " << c.h2 << ")^" << c.e << ")  # " << c.tag << "\n";
  }
  return os.str();
}

}  // namespace uavrelay::convex
