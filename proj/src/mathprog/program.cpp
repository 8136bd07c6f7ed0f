#include "coplan/mathprog.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace coplan::mp {

LinearExpr& LinearExpr::add(const LinearExpr& other, double scale) {
  for (const auto& t : other.terms) add(t.var, t.coef * scale);
  constant += other.constant * scale;
  return *this;
}

bool Program::has_binaries() const {
  return std::any_of(vars_.begin(), vars_.end(), [](const VarInfo& v) { return v.kind == VarKind::Binary; });
}

double Program::evaluate_objective(const std::vector<double>& x) const {
  double value = objective_constant_;
  for (const auto& t : objective_) value += t.coef * x.at(static_cast<std::size_t>(t.var.id));
  for (const auto& s : objective_squares_) {
    const double xv = x.at(static_cast<std::size_t>(s.var.id));
    value += s.weight * xv * xv;
  }
  return value;
}

double Program::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const VarInfo& v = vars_[j];
    worst = std::max({worst, v.lower - x[j], x[j] - v.upper});
    if (v.kind == VarKind::Binary) worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
  }
  for (const auto& r : rows_) {
    double lhs = 0.0;
    for (const auto& t : r.terms) lhs += t.coef * x[static_cast<std::size_t>(t.var.id)];
    switch (r.sense) {
      case RowSense::LessEqual: worst = std::max(worst, lhs - r.rhs); break;
      case RowSense::GreaterEqual: worst = std::max(worst, r.rhs - lhs); break;
      case RowSense::Equal: worst = std::max(worst, std::abs(lhs - r.rhs)); break;
    }
  }
  for (const auto& q : quad_rows_) {
    double lhs = 0.0;
    for (const auto& s : q.squares) {
      const double xv = x[static_cast<std::size_t>(s.var.id)];
      lhs += s.weight * xv * xv;
    }
    for (const auto& t : q.linear) lhs += t.coef * x[static_cast<std::size_t>(t.var.id)];
    worst = std::max(worst, lhs - q.rhs);
  }
  return std::max(worst, 0.0);
}

ProgramBuilder::ProgramBuilder(Sense sense) { program_.sense_ = sense; }

VarRef ProgramBuilder::add_binary(std::string name) {
  program_.vars_.push_back({VarKind::Binary, 0.0, 1.0, std::move(name), 0});
  return {program_.num_vars() - 1};
}

VarRef ProgramBuilder::add_continuous(double lower, double upper, std::string name) {
  if (!(lower <= upper)) throw ModelError("variable '" + name + "' has empty bounds");
  program_.vars_.push_back({VarKind::Continuous, lower, upper, std::move(name), 0});
  return {program_.num_vars() - 1};
}

VarRef ProgramBuilder::add_free(std::string name) {
  program_.vars_.push_back({VarKind::Free, -kInf, kInf, std::move(name), 0});
  return {program_.num_vars() - 1};
}

namespace {

void check_ref(const Program& p, VarRef v) {
  if (v.id < 0 || v.id >= p.num_vars()) throw ModelError("variable reference out of range");
}

void check_finite(double c, const std::string& where) {
  if (!std::isfinite(c)) throw ModelError("non-finite coefficient in " + where);
}

// Merges duplicate variables and drops zero coefficients.
std::vector<LinearTerm> canonical(const std::vector<LinearTerm>& terms) {
  std::map<int, double> merged;
  for (const auto& t : terms) merged[t.var.id] += t.coef;
  std::vector<LinearTerm> out;
  for (const auto& [id, c] : merged) {
    if (c != 0.0) out.push_back({VarRef{id}, c});
  }
  return out;
}

}  // namespace

void ProgramBuilder::set_bounds(VarRef v, double lower, double upper) {
  check_ref(program_, v);
  if (!(lower <= upper)) throw ModelError("empty bounds for variable " + std::to_string(v.id));
  auto& info = program_.vars_[static_cast<std::size_t>(v.id)];
  if (info.kind == VarKind::Binary) {
    lower = std::max(lower, 0.0);
    upper = std::min(upper, 1.0);
  }
  info.lower = lower;
  info.upper = upper;
}

void ProgramBuilder::set_branch_priority(VarRef v, int priority) {
  check_ref(program_, v);
  program_.vars_[static_cast<std::size_t>(v.id)].branch_priority = priority;
}

const VarInfo& ProgramBuilder::var(VarRef v) const {
  check_ref(program_, v);
  return program_.vars_[static_cast<std::size_t>(v.id)];
}

void ProgramBuilder::add_row(const LinearExpr& lhs, RowSense sense, double rhs, std::string name) {
  add_constraint({lhs.terms, sense, rhs - lhs.constant, std::move(name)});
}

void ProgramBuilder::add_constraint(LinearConstraint row) {
  for (const auto& t : row.terms) {
    check_ref(program_, t.var);
    check_finite(t.coef, "row '" + row.name + "'");
  }
  check_finite(row.rhs, "rhs of row '" + row.name + "'");
  row.terms = canonical(row.terms);
  program_.rows_.push_back(std::move(row));
}

void ProgramBuilder::add_quad_row(QuadConstraint row) {
  for (const auto& s : row.squares) {
    check_ref(program_, s.var);
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight)) throw ModelError("quadratic row '" + row.name + "' is not convex");
  }
  for (const auto& t : row.linear) {
    check_ref(program_, t.var);
    check_finite(t.coef, "quadratic row '" + row.name + "'");
  }
  row.linear = canonical(row.linear);
  program_.quad_rows_.push_back(std::move(row));
}

void ProgramBuilder::set_objective(const LinearExpr& expr) {
  for (const auto& t : expr.terms) {
    check_ref(program_, t.var);
    check_finite(t.coef, "objective");
  }
  program_.objective_ = canonical(expr.terms);
  program_.objective_constant_ = expr.constant;
}

void ProgramBuilder::add_objective_square(VarRef v, double weight) {
  check_ref(program_, v);
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw ModelError("objective square weight must be nonnegative");
  const bool convex = program_.sense_ == Sense::Minimize;
  if (!convex && weight > 0.0) throw ModelError("squares in a maximization objective are not concave");
  if (weight > 0.0) program_.objective_squares_.push_back({v, weight});
}

Interval ProgramBuilder::bounds_of(const LinearExpr& expr) const {
  Interval out{expr.constant, expr.constant};
  for (const auto& t : expr.terms) {
    const auto& info = var(t.var);
    const double a = t.coef * info.lower;
    const double b = t.coef * info.upper;
    if (t.coef == 0.0) continue;
    out.lo += std::min(a, b);
    out.hi += std::max(a, b);
  }
  return out;
}

double ProgramBuilder::big_m_for(const LinearExpr& expr) const {
  const Interval b = bounds_of(expr);
  const double m = std::max(std::abs(b.lo), std::abs(b.hi));
  if (!std::isfinite(m)) throw ModelError("big-M requested for an expression with unbounded range");
  return 1.1 * std::max(m, 1e-9);
}

Program ProgramBuilder::finish() && { return std::move(program_); }

void add_bigM_indicator(ProgramBuilder& program, VarRef indicator, const LinearExpr& expr, double big_m,
                        BigMMode mode) {
  if (!(big_m > 0.0) || !std::isfinite(big_m)) throw ModelError("big-M must be positive and finite");
  if (program.var(indicator).kind != VarKind::Binary) throw ModelError("indicator must be binary");
  if (mode == BigMMode::UpperWhenOff || mode == BigMMode::Both) {
    LinearExpr e = expr;
    e.add(indicator, -big_m);
    program.add_row(e, RowSense::LessEqual, 0.0, "bigM_up");
  }
  if (mode == BigMMode::LowerWhenOff || mode == BigMMode::Both) {
    // expr >= -M (1 - b)  <=>  expr - M b >= -M
    LinearExpr e = expr;
    e.add(indicator, -big_m);
    program.add_row(e, RowSense::GreaterEqual, -big_m, "bigM_lo");
  }
  if (mode == BigMMode::UpperWhenOn) {
    LinearExpr e = expr;
    e.add(indicator, big_m);
    program.add_row(e, RowSense::LessEqual, big_m, "bigM_on");
  }
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::OptimalWithinGap: return "optimal-within-gap";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::Limit: return "limit";
  }
  return "unknown";
}

double relative_gap(double incumbent, double relaxation, Sense sense) {
  if (!std::isfinite(incumbent)) return kInf;
  if (!std::isfinite(relaxation)) return kInf;
  const double diff = sense == Sense::Minimize ? incumbent - relaxation : relaxation - incumbent;
  return std::max(diff, 0.0) / std::max(std::abs(incumbent), 1e-10);
}

}  // namespace coplan::mp
