#include <algorithm>
#include <cmath>
#include <map>

#include "coplan/dispatch.hpp"
#include "coplan/network.hpp"
#include "coplan/transport.hpp"

namespace coplan::network {

MasterModel build_master(const io::InstanceSpec& instance, const std::vector<dispatch::DiuRealization>& scenarios,
                         const transport::TransportScenario& fleet, double bound_floor) {
  const int n = instance.num_nodes();
  const int L = instance.num_lines();
  const int H = instance.num_hubs();
  const int T = instance.horizon;
  const int root = instance.root_index();
  const double flow_cap = total_fictitious_demand(instance);
  mp::ProgramBuilder b(mp::Sense::Minimize);
  MasterModel mm;

  for (int e = 0; e < L; ++e) {
    const auto& ln = instance.lines[static_cast<std::size_t>(e)];
    const std::string lt = std::to_string(ln.from) + "_" + std::to_string(ln.to);
    const auto y = b.add_binary("y_" + lt);
    b.set_branch_priority(y, 2);
    mm.y_line.push_back(y);
    mm.beta.push_back({b.add_binary("beta_" + lt), b.add_binary("beta_" + std::to_string(ln.to) + "_" + std::to_string(ln.from))});
    const auto f = b.add_free("F_" + lt);
    b.set_bounds(f, -flow_cap, flow_cap);
    mm.fflow.push_back(f);
    mm.investment.add(y, line_annual_cost(instance, e));
  }
  for (int k = 0; k < H; ++k) {
    const auto y = b.add_binary("yrcs_" + std::to_string(instance.hubs[static_cast<std::size_t>(k)].id));
    b.set_branch_priority(y, 3);
    mm.y_rcs.push_back(y);
    mm.investment.add(y, hub_annual_cost(instance, k));
  }

  // Spanning tree with parent pointers and the fictitious single-commodity flow.
  std::vector<mp::LinearExpr> parents(static_cast<std::size_t>(n)), inflow(static_cast<std::size_t>(n));
  mp::LinearExpr count;
  for (int e = 0; e < L; ++e) {
    const auto& ln = instance.lines[static_cast<std::size_t>(e)];
    const auto fi = static_cast<std::size_t>(instance.node_index(ln.from));
    const auto ti = static_cast<std::size_t>(instance.node_index(ln.to));
    const auto ee = static_cast<std::size_t>(e);
    b.add_row(mp::LinearExpr().add(mm.beta[ee][0], 1.0).add(mm.beta[ee][1], 1.0).add(mm.y_line[ee], -1.0),
              mp::RowSense::Equal, 0.0, "orient");
    parents[ti].add(mm.beta[ee][0], 1.0);
    parents[fi].add(mm.beta[ee][1], 1.0);
    inflow[ti].add(mm.fflow[ee], 1.0);
    inflow[fi].add(mm.fflow[ee], -1.0);
    b.add_row(mp::LinearExpr().add(mm.fflow[ee], 1.0).add(mm.y_line[ee], -flow_cap), mp::RowSense::LessEqual, 0.0);
    b.add_row(mp::LinearExpr().add(mm.fflow[ee], 1.0).add(mm.y_line[ee], flow_cap), mp::RowSense::GreaterEqual, 0.0);
    count.add(mm.y_line[ee], 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    if (i == root) {
      if (!parents[ii].terms.empty()) b.add_row(parents[ii], mp::RowSense::Equal, 0.0, "root_parent");
      continue;
    }
    b.add_row(parents[ii], mp::RowSense::Equal, 1.0, "one_parent");
    b.add_row(inflow[ii], mp::RowSense::Equal, instance.nodes[ii].fictitious_demand, "fict_flow");
  }
  b.add_row(count, mp::RowSense::Equal, static_cast<double>(n - 1), "tree_size");
  mp::LinearExpr sited;
  for (const auto& y : mm.y_rcs) sited.add(y, 1.0);
  b.add_row(sited, mp::RowSense::GreaterEqual, static_cast<double>(instance.rcs_min_count), "rcs_min");

  // Middle level: closest open hub per arrival hub, canonical schedules.
  const transport::Matrix dist = transport::shortest_distance_matrix(instance);
  const bool counts = transport::count_bounds_active(instance);
  const double cev = instance.ev.travel_cost_per_km();
  mm.assign.assign(static_cast<std::size_t>(H), std::vector<mp::VarRef>(static_cast<std::size_t>(fleet.fleet_size)));
  std::map<int, std::vector<mp::VarRef>> group;  // arrival hub -> per-hub assignment (shared when counts are free)
  std::vector<std::vector<double>> schedule;
  double charging = 0.0;
  for (int u = 0; u < fleet.fleet_size; ++u) {
    const int arr = fleet.arrival_hub[static_cast<std::size_t>(u)];
    schedule.push_back(transport::canonical_schedule(instance, fleet.soc_init[static_cast<std::size_t>(u)],
                                                     fleet.soc_target[static_cast<std::size_t>(u)]));
    for (int t : instance.ev.charge_window) {
      charging += 365.0 * instance.tou_prices[static_cast<std::size_t>(t)] * schedule.back()[static_cast<std::size_t>(t)];
    }
    std::vector<mp::VarRef> vars;
    if (!counts && group.count(arr) != 0) {
      vars = group[arr];
    } else {
      for (int k = 0; k < H; ++k) {
        const std::string nm = "a_" + std::to_string(instance.hubs[static_cast<std::size_t>(k)].id) + "_" + std::to_string(u);
        vars.push_back(counts ? b.add_binary(nm) : b.add_continuous(0.0, 1.0, nm));
        b.add_row(mp::LinearExpr().add(vars.back(), 1.0).add(mm.y_rcs[static_cast<std::size_t>(k)], -1.0), mp::RowSense::LessEqual, 0.0);
      }
      mp::LinearExpr one;
      for (const auto& v : vars) one.add(v, 1.0);
      b.add_row(one, mp::RowSense::Equal, 1.0, "assign_one");
      if (!counts) {
        const auto pref = transport::hub_preference(dist, arr);
        mp::LinearExpr prefix;
        for (int k : pref) {
          prefix.add(vars[static_cast<std::size_t>(k)], 1.0);
          mp::LinearExpr row = prefix;
          row.add(mm.y_rcs[static_cast<std::size_t>(k)], -1.0);
          b.add_row(row, mp::RowSense::GreaterEqual, 0.0, "closest");
        }
        group[arr] = vars;
      }
    }
    for (int k = 0; k < H; ++k) {
      mm.assign[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] = vars[static_cast<std::size_t>(k)];
      mm.middle.add(vars[static_cast<std::size_t>(k)], 365.0 * cev * dist[static_cast<std::size_t>(arr)][static_cast<std::size_t>(k)]);
    }
  }
  mm.middle.constant += charging;
  if (counts) {
    for (int k = 0; k < H; ++k) {
      const auto& hub = instance.hubs[static_cast<std::size_t>(k)];
      mp::LinearExpr c;
      for (const auto& v : mm.assign[static_cast<std::size_t>(k)]) c.add(v, 1.0);
      if (hub.n_min > 0.0) b.add_row(c, mp::RowSense::GreaterEqual, hub.n_min);
      if (std::isfinite(hub.n_max)) b.add_row(c, mp::RowSense::LessEqual, hub.n_max);
    }
  }

  dispatch::OperationInputs in;
  for (const auto& y : mm.y_line) in.lines.push_back(dispatch::Switch{y, 0.0});
  for (const auto& y : mm.y_rcs) in.hubs.push_back(dispatch::Switch{y, 0.0});
  for (int t = 0; t < T; ++t) in.periods.push_back(t);
  in.hub_load.assign(static_cast<std::size_t>(H), std::vector<mp::LinearExpr>(static_cast<std::size_t>(T)));
  for (int k = 0; k < H; ++k) {
    for (int u = 0; u < fleet.fleet_size; ++u) {
      for (int t = 0; t < T; ++t) {
        const double kw = schedule[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)];
        if (kw != 0.0) {
          in.hub_load[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)].add(
              mm.assign[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)], kw / instance.bases.power_kva);
        }
      }
    }
  }

  mm.eta = b.add_continuous(0.0, mp::kInf, "eta");
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto ov = dispatch::add_operation_block(b, instance, in, scenarios[s], dispatch::LossMode::Epigraph);
    mp::LinearExpr row;
    row.add(mm.eta, 1.0).add(ov.loss, -1.0);
    b.add_row(row, mp::RowSense::GreaterEqual, 0.0, "recourse_" + std::to_string(s));
  }
  mp::LinearExpr total = mm.investment;
  total.add(mm.middle).add(mm.eta, 1.0);
  if (bound_floor > 0.0 && std::isfinite(bound_floor)) b.add_row(total, mp::RowSense::GreaterEqual, bound_floor, "floor");
  b.set_objective(total);
  mm.program = std::move(b).finish();
  return mm;
}

PlanDecision MasterModel::decode(const mp::SolveOutcome& out) const {
  PlanDecision p;
  for (const auto& y : y_line) p.y_line.push_back(out.value(y) > 0.5 ? 1 : 0);
  for (const auto& y : y_rcs) p.y_rcs.push_back(out.value(y) > 0.5 ? 1 : 0);
  for (const auto& bt : beta) p.beta.push_back({out.value(bt[0]) > 0.5 ? 1 : 0, out.value(bt[1]) > 0.5 ? 1 : 0});
  for (const auto& f : fflow) p.fflow.push_back(out.value(f));
  return p;
}

namespace {

double eval(const mp::LinearExpr& e, const mp::SolveOutcome& out) {
  double v = e.constant;
  for (const auto& t : e.terms) v += t.coef * out.value(t.var);
  return v;
}

}  // namespace

double MasterModel::investment_value(const mp::SolveOutcome& out) const { return eval(investment, out); }

double MasterModel::middle_value(const mp::SolveOutcome& out) const { return eval(middle, out); }

}  // namespace coplan::network
