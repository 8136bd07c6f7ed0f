#pragma once

// Upper level: radial topology and RCS siting decisions, radiality checks,
// annualized investment and the master program.

#include <array>
#include <string>
#include <vector>

#include "coplan/instance.hpp"
#include "coplan/mathprog.hpp"

namespace coplan::dispatch {
struct DiuRealization;
}
namespace coplan::transport {
struct TransportScenario;
}

namespace coplan::network {

struct PlanDecision {
  std::vector<int> y_line;                // per candidate line
  std::vector<int> y_rcs;                 // per hub
  std::vector<std::array<int, 2>> beta;   // [0]: from is parent of to, [1]: to is parent of from
  std::vector<double> fflow;              // signed, from -> to

  std::vector<int> built_lines() const;
  std::vector<int> built_hubs() const;
};

// Orientation and fictitious flows derived from the built lines (rooted BFS).
// Lines outside the root's component keep beta = 0 and F = 0.
PlanDecision make_plan(const io::InstanceSpec& instance, const std::vector<int>& lines,
                       const std::vector<int>& hubs);

struct ValidationReport {
  bool ok = true;
  bool pseudo_loop = false;
  std::vector<std::string> violations;
};

// Flow bound M of the radiality rows (n - 1 with unit demands).
double total_fictitious_demand(const io::InstanceSpec& instance);

ValidationReport validate_radial(const PlanDecision& plan, const io::InstanceSpec& instance);

double line_annual_cost(const io::InstanceSpec& instance, int line);
double hub_annual_cost(const io::InstanceSpec& instance, int hub);
double investment_cost(const PlanDecision& plan, const io::InstanceSpec& instance);

// Sorted built lines as "i-j" and sorted RCS ids, hashed (FNV-1a, 16 hex digits).
std::string plan_fingerprint(const PlanDecision& plan, const io::InstanceSpec& instance);
std::string plan_summary(const PlanDecision& plan, const io::InstanceSpec& instance);

struct MasterModel {
  mp::Program program;
  std::vector<mp::VarRef> y_line, y_rcs, fflow;
  std::vector<std::array<mp::VarRef, 2>> beta;
  std::vector<std::vector<mp::VarRef>> assign;  // [hub][ev]
  mp::VarRef eta;
  mp::LinearExpr investment;
  mp::LinearExpr middle;

  PlanDecision decode(const mp::SolveOutcome& outcome) const;
  double investment_value(const mp::SolveOutcome& outcome) const;
  double middle_value(const mp::SolveOutcome& outcome) const;
};

// min c'y + middle(z) + eta with one LinDistFlow recourse copy per scenario
// in U and the floor c'y + middle + eta >= floor.
MasterModel build_master(const io::InstanceSpec& instance, const std::vector<dispatch::DiuRealization>& scenarios,
                         const transport::TransportScenario& fleet, double bound_floor);

}  // namespace coplan::network
