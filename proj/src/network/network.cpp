#include "coplan/network.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <queue>
#include <sstream>

namespace coplan::network {

std::vector<int> PlanDecision::built_lines() const {
  std::vector<int> out;
  for (std::size_t e = 0; e < y_line.size(); ++e) {
    if (y_line[e] != 0) out.push_back(static_cast<int>(e));
  }
  return out;
}

std::vector<int> PlanDecision::built_hubs() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < y_rcs.size(); ++k) {
    if (y_rcs[k] != 0) out.push_back(static_cast<int>(k));
  }
  return out;
}

PlanDecision make_plan(const io::InstanceSpec& instance, const std::vector<int>& lines, const std::vector<int>& hubs) {
  const int n = instance.num_nodes();
  const int L = instance.num_lines();
  PlanDecision plan;
  plan.y_line.assign(static_cast<std::size_t>(L), 0);
  plan.y_rcs.assign(static_cast<std::size_t>(instance.num_hubs()), 0);
  plan.beta.assign(static_cast<std::size_t>(L), {0, 0});
  plan.fflow.assign(static_cast<std::size_t>(L), 0.0);
  for (int e : lines) plan.y_line[static_cast<std::size_t>(e)] = 1;
  for (int k : hubs) plan.y_rcs[static_cast<std::size_t>(k)] = 1;

  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n));
  for (int e : lines) {
    const auto& ln = instance.lines[static_cast<std::size_t>(e)];
    const int a = instance.node_index(ln.from);
    const int b = instance.node_index(ln.to);
    adj[static_cast<std::size_t>(a)].emplace_back(b, e);
    adj[static_cast<std::size_t>(b)].emplace_back(a, e);
  }
  const int root = instance.root_index();
  std::vector<int> parent_edge(static_cast<std::size_t>(n), -1), order;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> bfs;
  bfs.push(root);
  seen[static_cast<std::size_t>(root)] = 1;
  while (!bfs.empty()) {
    const int v = bfs.front();
    bfs.pop();
    order.push_back(v);
    for (const auto& [w, e] : adj[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(w)] != 0) continue;
      seen[static_cast<std::size_t>(w)] = 1;
      parent_edge[static_cast<std::size_t>(w)] = e;
      const auto& ln = instance.lines[static_cast<std::size_t>(e)];
      // beta[0]: from is the parent of to.
      plan.beta[static_cast<std::size_t>(e)][instance.node_index(ln.from) == v ? 0 : 1] = 1;
      bfs.push(w);
    }
  }
  std::vector<double> subtree(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    if (i != root && seen[static_cast<std::size_t>(i)] != 0) subtree[static_cast<std::size_t>(i)] = instance.nodes[static_cast<std::size_t>(i)].fictitious_demand;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    const int e = parent_edge[static_cast<std::size_t>(v)];
    if (e < 0) continue;
    const auto& ln = instance.lines[static_cast<std::size_t>(e)];
    const int parent = instance.node_index(ln.from) == v ? instance.node_index(ln.to) : instance.node_index(ln.from);
    subtree[static_cast<std::size_t>(parent)] += subtree[static_cast<std::size_t>(v)];
    plan.fflow[static_cast<std::size_t>(e)] = instance.node_index(ln.to) == v ? subtree[static_cast<std::size_t>(v)]
                                                                            : -subtree[static_cast<std::size_t>(v)];
  }
  return plan;
}

double total_fictitious_demand(const io::InstanceSpec& instance) {
  double total = 0.0;
  for (int i = 0; i < instance.num_nodes(); ++i) {
    if (i != instance.root_index()) total += instance.nodes[static_cast<std::size_t>(i)].fictitious_demand;
  }
  return total;
}

namespace {

// Feasibility of the fictitious single-commodity flow on the built lines.
bool flow_feasible(const PlanDecision& plan, const io::InstanceSpec& instance) {
  const int n = instance.num_nodes();
  const double cap = total_fictitious_demand(instance);
  mp::ProgramBuilder b(mp::Sense::Minimize);
  std::vector<mp::LinearExpr> balance(static_cast<std::size_t>(n));
  for (int e = 0; e < instance.num_lines(); ++e) {
    if (plan.y_line[static_cast<std::size_t>(e)] == 0) continue;
    const auto f = b.add_free();
    b.set_bounds(f, -cap, cap);
    const auto& ln = instance.lines[static_cast<std::size_t>(e)];
    balance[static_cast<std::size_t>(instance.node_index(ln.to))].add(f, 1.0);
    balance[static_cast<std::size_t>(instance.node_index(ln.from))].add(f, -1.0);
  }
  const int root = instance.root_index();
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    b.add_row(balance[static_cast<std::size_t>(i)], mp::RowSense::Equal,
              instance.nodes[static_cast<std::size_t>(i)].fictitious_demand);
  }
  const mp::Program p = std::move(b).finish();
  return mp::solve_with_gap(p, 0.0).has_solution();
}

}  // namespace

ValidationReport validate_radial(const PlanDecision& plan, const io::InstanceSpec& instance) {
  ValidationReport rep;
  const int n = instance.num_nodes();
  const int L = instance.num_lines();
  auto fail = [&](std::string msg) {
    rep.ok = false;
    rep.violations.push_back(std::move(msg));
  };
  if (static_cast<int>(plan.y_line.size()) != L) {
    fail("plan must give a value for each of the " + std::to_string(L) + " candidate lines");
    return rep;
  }
  const int built = static_cast<int>(std::count(plan.y_line.begin(), plan.y_line.end(), 1));
  if (built != n - 1) fail("built line count " + std::to_string(built) + " differs from n-1 = " + std::to_string(n - 1));

  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) v = parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
    return v;
  };
  for (int e = 0; e < L; ++e) {
    if (plan.y_line[static_cast<std::size_t>(e)] == 0) continue;
    const auto& ln = instance.lines[static_cast<std::size_t>(e)];
    const int a = find(instance.node_index(ln.from));
    const int b = find(instance.node_index(ln.to));
    if (a == b) rep.pseudo_loop = true;
    parent[static_cast<std::size_t>(a)] = b;
  }
  if (rep.pseudo_loop) fail("built lines contain a loop");
  const int root = find(instance.root_index());
  for (int i = 0; i < n; ++i) {
    if (find(i) != root) fail("node " + std::to_string(instance.nodes[static_cast<std::size_t>(i)].id) + " is not reachable from the root");
  }
  if (!flow_feasible(plan, instance)) fail("no feasible fictitious flow on the built lines");

  if (!plan.beta.empty()) {
    std::vector<int> parents(static_cast<std::size_t>(n), 0);
    for (int e = 0; e < L; ++e) {
      const auto& bt = plan.beta[static_cast<std::size_t>(e)];
      const auto& ln = instance.lines[static_cast<std::size_t>(e)];
      if (bt[0] + bt[1] != plan.y_line[static_cast<std::size_t>(e)]) {
        fail("orientation of line " + std::to_string(ln.from) + "-" + std::to_string(ln.to) + " disagrees with y");
      }
      parents[static_cast<std::size_t>(instance.node_index(ln.to))] += bt[0];
      parents[static_cast<std::size_t>(instance.node_index(ln.from))] += bt[1];
      if (static_cast<int>(plan.fflow.size()) == L && std::abs(plan.fflow[static_cast<std::size_t>(e)]) > total_fictitious_demand(instance) * plan.y_line[static_cast<std::size_t>(e)] + 1e-6) {
        fail("fictitious flow on line " + std::to_string(ln.from) + "-" + std::to_string(ln.to) + " exceeds its bound");
      }
    }
    for (int i = 0; i < n; ++i) {
      const int want = i == instance.root_index() ? 0 : 1;
      if (parents[static_cast<std::size_t>(i)] != want) {
        fail("node " + std::to_string(instance.nodes[static_cast<std::size_t>(i)].id) + " has " +
             std::to_string(parents[static_cast<std::size_t>(i)]) + " parents");
      }
    }
  }
  const int rcs = static_cast<int>(std::count(plan.y_rcs.begin(), plan.y_rcs.end(), 1));
  if (rcs < instance.rcs_min_count) {
    fail("only " + std::to_string(rcs) + " RCS sited, at least " + std::to_string(instance.rcs_min_count) + " required");
  }
  return rep;
}

double line_annual_cost(const io::InstanceSpec& instance, int line) {
  const auto& ln = instance.lines[static_cast<std::size_t>(line)];
  return io::capital_recovery_factor(instance.finance.rate, instance.finance.line_lifespan) * ln.unit_cost * ln.length_km;
}

double hub_annual_cost(const io::InstanceSpec& instance, int hub) {
  return io::rcs_recovery_factor(instance.finance) * instance.hubs[static_cast<std::size_t>(hub)].unit_cost;
}

double investment_cost(const PlanDecision& plan, const io::InstanceSpec& instance) {
  double c = 0.0;
  for (std::size_t e = 0; e < plan.y_line.size(); ++e) {
    if (plan.y_line[e] != 0) c += line_annual_cost(instance, static_cast<int>(e));
  }
  for (std::size_t k = 0; k < plan.y_rcs.size(); ++k) {
    if (plan.y_rcs[k] != 0) c += hub_annual_cost(instance, static_cast<int>(k));
  }
  return c;
}

namespace {

std::string canonical_plan_text(const PlanDecision& plan, const io::InstanceSpec& instance) {
  std::vector<std::pair<int, int>> lines;
  for (int e : plan.built_lines()) {
    const auto& ln = instance.lines[static_cast<std::size_t>(e)];
    lines.emplace_back(std::min(ln.from, ln.to), std::max(ln.from, ln.to));
  }
  std::sort(lines.begin(), lines.end());
  std::vector<int> hubs;
  for (int k : plan.built_hubs()) hubs.push_back(instance.hubs[static_cast<std::size_t>(k)].id);
  std::sort(hubs.begin(), hubs.end());
  std::ostringstream s;
  s << "lines:";
  for (const auto& [a, b] : lines) s << ' ' << a << '-' << b;
  s << "; rcs:";
  for (int h : hubs) s << ' ' << h;
  return s.str();
}

}  // namespace

std::string plan_fingerprint(const PlanDecision& plan, const io::InstanceSpec& instance) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical_plan_text(plan, instance)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string plan_summary(const PlanDecision& plan, const io::InstanceSpec& instance) {
  return canonical_plan_text(plan, instance);
}

}  // namespace coplan::network
