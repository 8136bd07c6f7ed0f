#pragma once

// Column-and-constraint generation drivers: exact C&CG, inexact iC&CG with
// backtracking, and the adaptive stochastic-robust A-iC&CG. Also the bound
// bookkeeping checks and an exhaustive enumeration oracle for small cases.

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coplan/dispatch.hpp"
#include "coplan/instance.hpp"
#include "coplan/network.hpp"
#include "coplan/transport.hpp"

namespace coplan::decomp {

enum class Algorithm { Ccg, Iccg, Aiccg };
enum class Phase { Exploit, Explore, Terminate, Halt };

std::string to_string(Algorithm a);
std::string to_string(Phase p);
std::optional<Algorithm> parse_algorithm(const std::string& name);

struct TraceRow {
  int iteration = 0;  // index i, rewound to k on exploitation
  Phase phase = Phase::Explore;
  int k = 0;
  double ub_i = 0.0;
  double lb_i = 0.0;
  double ub_bar = 0.0;
  double lb_k = 0.0;
  double eps_up = 0.0;
  int scen_count = 0;
  int fleet_draw = 0;  // fleet size used by the lower level
  double wall_ms = 0.0;
};

struct AlgoTrace {
  std::vector<TraceRow> rows;

  static const std::vector<std::string>& columns();
  std::string to_csv() const;
  static AlgoTrace from_csv(const std::string& text);
};

struct RunOptions {
  dispatch::WorstCaseOptions oracle;
  double master_time_limit_s = 600.0;
  std::function<void(const TraceRow&)> on_row;  // progress hook, called once per master solve
};

// One fleet-size draw of the adaptive tracking step.
struct FleetDraw {
  transport::IntervalMode mode = transport::IntervalMode::Full;
  double mu_prev = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double draw = 0.0;
  int fleet_size = 0;
};

struct RunResult {
  Algorithm algorithm = Algorithm::Aiccg;
  network::PlanDecision plan;  // plan attaining the final upper bound
  double objective = 0.0;      // upper bound UB_bar
  double lower_bound = 0.0;    // LB^k at exit
  double gap_certified = 0.0;
  bool terminated = false;     // false when the iteration cap was hit
  int iterations = 0;          // master solves
  int explorations = 0;
  int exploitations = 0;
  int distinct_u = 0;          // distinct worst-case realizations returned
  int max_consecutive_exploitations = 0;
  double investment = 0.0;
  double middle = 0.0;
  double loss = 0.0;
  transport::TransportScenario fleet;  // lower-level fleet of the incumbent
  dispatch::DiuRealization worst;      // u* of the incumbent
  std::vector<dispatch::DiuRealization> scenarios;
  std::vector<double> exploitation_gaps;    // realized gap at each exploitation
  std::vector<double> exploitation_bounds;  // gap_bound at each exploitation
  std::vector<FleetDraw> draws;  // empty for the fixed-fleet algorithms
  std::vector<std::string> notes;
  double epsilon = 0.0;
  double epsilon_tilde = 0.0;
  double eps_up_init = 0.0;
  double alpha = 0.0;
  double wall_ms = 0.0;
  AlgoTrace trace;
};

// LB^i above UB_bar beyond the allowed slack, or a repeated worst case.
class BoundViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No plan admits a feasible master or middle level.
class InfeasibleInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunResult run_aiccg(const io::InstanceSpec& instance, const io::AlgoParams& params, const RunOptions& options = {});
RunResult run_iccg(const io::InstanceSpec& instance, const io::AlgoParams& params, const RunOptions& options = {});
RunResult run_ccg(const io::InstanceSpec& instance, const io::AlgoParams& params, const RunOptions& options = {});
RunResult run(Algorithm algorithm, const io::InstanceSpec& instance, const io::AlgoParams& params,
              const RunOptions& options = {});

// 1 - (1 - eps_tilde) * prod (1 - eps_up^n) over the history k..i.
double gap_bound(double eps_tilde, const std::vector<double>& eps_up_history);

// Re-derives every phase decision and bound claim from the trace alone.
struct TraceCheck {
  bool ok = true;
  std::vector<std::string> issues;
};
TraceCheck check_trace(const AlgoTrace& trace, double epsilon, double eps_tilde, double sandwich_slack);

// Enumerates every spanning tree, every hub subset of admissible size and
// every DIU box vertex; the inner dispatch on a tree is evaluated directly.
struct OracleResult {
  double objective = std::numeric_limits<double>::infinity();
  network::PlanDecision plan;
  double investment = 0.0;
  double middle = 0.0;
  double loss = 0.0;
  long plans = 0;
  long evaluations = 0;
};
OracleResult exhaustive_oracle(const io::InstanceSpec& instance, const transport::TransportScenario& fleet);

// Worst-case loss of a radial plan over all DIU vertices by direct tree
// evaluation (infinity when any vertex is infeasible).
double tree_worst_loss(const io::InstanceSpec& instance, const network::PlanDecision& plan,
                       const dispatch::Table& hub_load_kw, long* evaluations = nullptr);

}  // namespace coplan::decomp
