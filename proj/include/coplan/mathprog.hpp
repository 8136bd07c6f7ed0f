#pragma once

// Solver-agnostic mathematical programs: binary / continuous variables,
// linear rows, separable convex-quadratic objective terms and convex
// quadratic rows (handled by outer-approximation cuts in the embedded
// backend), solved to a requested relative gap.

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coplan::mp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kFeasibilityTol = 1e-6;
inline constexpr double kIntegralityTol = 1e-6;

enum class VarKind { Binary, Continuous, Free };
enum class Sense { Minimize, Maximize };
enum class RowSense { LessEqual, Equal, GreaterEqual };

struct VarRef {
  int id = -1;
  bool valid() const { return id >= 0; }
  friend bool operator==(VarRef a, VarRef b) { return a.id == b.id; }
};

struct LinearTerm {
  VarRef var;
  double coef = 0.0;
};

struct LinearExpr {
  std::vector<LinearTerm> terms;
  double constant = 0.0;

  LinearExpr() = default;
  LinearExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)

  LinearExpr& add(VarRef v, double coef) {
    if (coef != 0.0) terms.push_back({v, coef});
    return *this;
  }
  LinearExpr& add(const LinearExpr& other, double scale = 1.0);
};

struct LinearConstraint {
  std::vector<LinearTerm> terms;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
  std::string name;
};

struct SquareTerm {
  VarRef var;
  double weight = 0.0;  // >= 0
};

// sum_i weight_i * x_i^2 + linear <= rhs
struct QuadConstraint {
  std::vector<SquareTerm> squares;
  std::vector<LinearTerm> linear;
  double rhs = 0.0;
  std::string name;
};

struct VarInfo {
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = kInf;
  std::string name;
  int branch_priority = 0;
};

// Immutable once built; safe to share across threads and to solve
// concurrently in independent sessions.
class Program {
 public:
  Sense sense() const { return sense_; }
  int num_vars() const { return static_cast<int>(vars_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<VarInfo>& vars() const { return vars_; }
  const std::vector<LinearConstraint>& rows() const { return rows_; }
  const std::vector<QuadConstraint>& quad_rows() const { return quad_rows_; }
  const std::vector<LinearTerm>& objective() const { return objective_; }
  const std::vector<SquareTerm>& objective_squares() const { return objective_squares_; }
  double objective_constant() const { return objective_constant_; }
  bool has_binaries() const;
  bool has_quadratic() const { return !objective_squares_.empty() || !quad_rows_.empty(); }

  // Objective evaluated exactly (including squares) at a full assignment.
  double evaluate_objective(const std::vector<double>& x) const;
  // Largest violation of any row, bound or integrality requirement.
  double max_violation(const std::vector<double>& x) const;

 private:
  friend class ProgramBuilder;
  friend Program parse_debug_text(std::istream& in);
  Sense sense_ = Sense::Minimize;
  std::vector<VarInfo> vars_;
  std::vector<LinearConstraint> rows_;
  std::vector<QuadConstraint> quad_rows_;
  std::vector<LinearTerm> objective_;
  std::vector<SquareTerm> objective_squares_;
  double objective_constant_ = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class BigMMode { UpperWhenOff, LowerWhenOff, Both, UpperWhenOn };

// Single writer. finish() hands back an immutable Program.
class ProgramBuilder {
 public:
  explicit ProgramBuilder(Sense sense);

  VarRef add_binary(std::string name = {});
  VarRef add_continuous(double lower = 0.0, double upper = kInf, std::string name = {});
  VarRef add_free(std::string name = {});
  void set_bounds(VarRef v, double lower, double upper);
  void set_branch_priority(VarRef v, int priority);
  const VarInfo& var(VarRef v) const;
  int num_vars() const { return program_.num_vars(); }

  void add_row(const LinearExpr& lhs, RowSense sense, double rhs, std::string name = {});
  void add_constraint(LinearConstraint row);
  void add_quad_row(QuadConstraint row);

  void set_objective(const LinearExpr& expr);
  void add_objective_square(VarRef v, double weight);

  // Range of an expression over the declared variable bounds.
  Interval bounds_of(const LinearExpr& expr) const;
  // 1.1 x max |expr| over the declared bounds; throws when unbounded.
  double big_m_for(const LinearExpr& expr) const;

  Program finish() &&;

 private:
  Program program_;
};

// Big-M indicator rows.
//   UpperWhenOff: expr <= M * indicator       (indicator = 0 forces expr <= 0)
//   LowerWhenOff: expr >= -M * (1 - indicator)  (indicator = 1 forces expr >= 0)
//   Both: both rows.
//   UpperWhenOn: expr <= M * (1 - indicator)  (indicator = 1 forces expr <= 0)
void add_bigM_indicator(ProgramBuilder& program, VarRef indicator, const LinearExpr& expr,
                        double big_m, BigMMode mode = BigMMode::UpperWhenOff);

enum class SolveStatus { OptimalWithinGap, Infeasible, Unbounded, Limit };

std::string_view to_string(SolveStatus status);

struct SolveOptions {
  double gap = 0.0;
  double time_limit_s = kInf;
  long max_nodes = 2'000'000;
  // Minimization only: stop once max(incumbent, floor) and max(bound, floor)
  // are within the gap. Reported values are not clamped.
  double objective_floor = -kInf;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::Infeasible;
  double incumbent_value = kInf;
  double relaxation_value = -kInf;
  std::vector<double> assignment;
  double gap = kInf;
  long nodes = 0;
  long lp_iterations = 0;

  bool has_solution() const { return !assignment.empty(); }
  double value(VarRef v) const { return assignment.at(static_cast<std::size_t>(v.id)); }
};

// Relative gap as reported in SolveOutcome.
double relative_gap(double incumbent, double relaxation, Sense sense);

class SolverBackend {
 public:
  virtual ~SolverBackend() = default;
  virtual std::string_view name() const = 0;
  virtual SolveOutcome solve(const Program& program, const SolveOptions& options) const = 0;
};

// "embedded" is always available. Additional engines register an adapter
// under their own name.
std::unique_ptr<SolverBackend> make_backend(std::string_view name);
void register_backend(std::string name, std::function<std::unique_ptr<SolverBackend>()> factory);
std::vector<std::string> available_backends();
// Backend named by COPLAN_SOLVER, or the embedded engine when unset.
const SolverBackend& default_backend();

SolveOutcome solve_with_gap(const Program& program, double gap, double time_limit_s = kInf);
SolveOutcome solve_with_gap(const Program& program, const SolveOptions& options);

// LP-style human-readable dump, and its parser.
void write_debug_text(const Program& program, std::ostream& out);
std::string to_debug_text(const Program& program);
Program parse_debug_text(std::istream& in);

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coplan::mp
