#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "coplan/decomposition.hpp"

namespace coplan::decomp {

namespace {

// Tree orientation: BFS order from the root and the incoming line per node.
struct Rooted {
  std::vector<int> order;
  std::vector<int> parent_line;  // -1 at the root
  std::vector<int> parent;
};

Rooted orient(const io::InstanceSpec& inst, const network::PlanDecision& plan) {
  const int n = inst.num_nodes();
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n));
  for (int e : plan.built_lines()) {
    const auto& ln = inst.lines[static_cast<std::size_t>(e)];
    adj[static_cast<std::size_t>(inst.node_index(ln.from))].emplace_back(inst.node_index(ln.to), e);
    adj[static_cast<std::size_t>(inst.node_index(ln.to))].emplace_back(inst.node_index(ln.from), e);
  }
  Rooted r;
  r.parent_line.assign(static_cast<std::size_t>(n), -1);
  r.parent.assign(static_cast<std::size_t>(n), -1);
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  r.order.push_back(inst.root_index());
  seen[static_cast<std::size_t>(inst.root_index())] = 1;
  for (std::size_t h = 0; h < r.order.size(); ++h) {
    const int v = r.order[h];
    for (const auto& [w, e] : adj[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = 1;
      r.parent[static_cast<std::size_t>(w)] = v;
      r.parent_line[static_cast<std::size_t>(w)] = e;
      r.order.push_back(w);
    }
  }
  if (static_cast<int>(r.order.size()) != n) throw std::invalid_argument("plan is not a spanning tree");
  return r;
}

// Per-period loss on a tree with fixed injections; infinity when infeasible.
double period_loss(const io::InstanceSpec& inst, const Rooted& tree, int t, const std::vector<double>& net_p,
                   const std::vector<double>& net_q, std::vector<double>& sp, std::vector<double>& sq,
                   std::vector<double>& v) {
  const std::size_t n = net_p.size();
  sp = net_p;
  sq = net_q;
  for (std::size_t h = n; h-- > 1;) {
    const auto w = static_cast<std::size_t>(tree.order[h]);
    const auto par = static_cast<std::size_t>(tree.parent[w]);
    sp[par] += sp[w];
    sq[par] += sq[w];
  }
  const auto root = static_cast<std::size_t>(tree.order[0]);
  const auto& sub = inst.substation;
  const double tol = 1e-9;
  if (sp[root] < sub.p_min - tol || sp[root] > sub.p_max + tol || sq[root] < sub.q_min - tol ||
      sq[root] > sub.q_max + tol) {
    return mp::kInf;
  }
  const double vlo = inst.voltage.lo * inst.voltage.lo;
  const double vhi = inst.voltage.hi * inst.voltage.hi;
  double loss = 0.0;
  v[root] = 1.0;
  for (std::size_t h = 1; h < n; ++h) {
    const auto w = static_cast<std::size_t>(tree.order[h]);
    const int e = tree.parent_line[w];
    const auto& ln = inst.lines[static_cast<std::size_t>(e)];
    const double P = sp[w];
    const double Q = sq[w];
    if (P * P + Q * Q > ln.capacity * ln.capacity * (1.0 + 1e-9)) return mp::kInf;
    v[w] = v[static_cast<std::size_t>(tree.parent[w])] - 2.0 * (ln.r * P + ln.x * Q);
    if (v[w] < vlo - tol || v[w] > vhi + tol) return mp::kInf;
    loss += dispatch::loss_weight(inst, e, t) * (P * P + Q * Q);
  }
  return loss;
}

}  // namespace

double tree_worst_loss(const io::InstanceSpec& instance, const network::PlanDecision& plan,
                       const dispatch::Table& hub_load_kw, long* evaluations) {
  if (instance.has_ess()) throw std::invalid_argument("direct tree evaluation does not cover storage");
  const Rooted tree = orient(instance, plan);
  const int n = instance.num_nodes();
  const int T = instance.horizon;
  const auto coords = dispatch::diu_coordinates(instance);
  const std::size_t d = coords.size();
  if (d > 24) throw std::invalid_argument("DIU box too large for exhaustive enumeration");
  const dispatch::DiuRealization base = dispatch::diu_lower_corner(instance);

  // Injections at the lower corner; each coordinate adds a known delta.
  std::vector<std::vector<double>> p0(static_cast<std::size_t>(T), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  auto q0 = p0;
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      p0[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = base.p_load[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
      q0[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = base.q_load[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
    }
    for (int k = 0; k < instance.num_hubs(); ++k) {
      const auto node = static_cast<std::size_t>(instance.node_index(instance.hubs[static_cast<std::size_t>(k)].dn_node));
      double inj = hub_load_kw[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] / instance.bases.power_kva;
      if (plan.y_rcs[static_cast<std::size_t>(k)] != 0 && instance.has_pv()) {
        inj -= base.p_pv[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
      }
      p0[static_cast<std::size_t>(t)][node] += inj;
    }
  }
  struct Delta {
    int period;
    std::size_t node;
    bool reactive;
    double amount;
  };
  std::vector<Delta> deltas;
  for (const auto& c : coords) {
    const double w = c.hi - c.lo;
    switch (c.kind) {
      case dispatch::DiuKind::PLoad: deltas.push_back({c.period, static_cast<std::size_t>(c.owner), false, w}); break;
      case dispatch::DiuKind::QLoad: deltas.push_back({c.period, static_cast<std::size_t>(c.owner), true, w}); break;
      case dispatch::DiuKind::PPv: {
        const bool on = plan.y_rcs[static_cast<std::size_t>(c.owner)] != 0;
        const auto node = static_cast<std::size_t>(instance.node_index(instance.hubs[static_cast<std::size_t>(c.owner)].dn_node));
        deltas.push_back({c.period, node, false, on ? -w : 0.0});
        break;
      }
    }
  }

  std::vector<double> sp(static_cast<std::size_t>(n)), sq(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
  std::vector<double> np, nq;
  double worst = -mp::kInf;
  const unsigned long long total = 1ULL << d;
  for (unsigned long long mask = 0; mask < total; ++mask) {
    double loss = 0.0;
    for (int t = 0; t < T && std::isfinite(loss); ++t) {
      np = p0[static_cast<std::size_t>(t)];
      nq = q0[static_cast<std::size_t>(t)];
      for (std::size_t c = 0; c < d; ++c) {
        if (((mask >> c) & 1ULL) == 0 || deltas[c].period != t) continue;
        (deltas[c].reactive ? nq : np)[deltas[c].node] += deltas[c].amount;
      }
      loss += period_loss(instance, tree, t, np, nq, sp, sq, v);
    }
    if (evaluations != nullptr) ++*evaluations;
    worst = std::max(worst, loss);
    if (!std::isfinite(worst)) break;
  }
  return worst;
}

OracleResult exhaustive_oracle(const io::InstanceSpec& instance, const transport::TransportScenario& fleet) {
  const int n = instance.num_nodes();
  const int L = instance.num_lines();
  const int H = instance.num_hubs();
  if (L > 24 || H > 16) throw std::invalid_argument("instance too large for the exhaustive oracle");
  OracleResult best;

  std::vector<std::vector<int>> trees;
  std::vector<int> pick(static_cast<std::size_t>(L), 0);
  std::fill(pick.end() - (n - 1), pick.end(), 1);
  do {
    std::vector<int> lines;
    std::vector<int> uf(static_cast<std::size_t>(n));
    std::iota(uf.begin(), uf.end(), 0);
    auto find = [&](int x) {
      while (uf[static_cast<std::size_t>(x)] != x) x = uf[static_cast<std::size_t>(x)];
      return x;
    };
    bool acyclic = true;
    for (int e = 0; e < L && acyclic; ++e) {
      if (!pick[static_cast<std::size_t>(e)]) continue;
      const auto& ln = instance.lines[static_cast<std::size_t>(e)];
      const int a = find(instance.node_index(ln.from));
      const int b = find(instance.node_index(ln.to));
      if (a == b) acyclic = false;
      uf[static_cast<std::size_t>(a)] = b;
      lines.push_back(e);
    }
    if (acyclic) trees.push_back(lines);
  } while (std::next_permutation(pick.begin(), pick.end()));

  std::map<unsigned, std::pair<double, dispatch::Table>> middle;  // hub mask -> cost, load
  for (unsigned mask = 0; mask < (1u << H); ++mask) {
    std::vector<int> hubs;
    for (int k = 0; k < H; ++k) {
      if (mask >> k & 1u) hubs.push_back(k);
    }
    if (static_cast<int>(hubs.size()) < instance.rcs_min_count) continue;
    std::vector<int> y(static_cast<std::size_t>(H), 0);
    for (int k : hubs) y[static_cast<std::size_t>(k)] = 1;
    try {
      const auto z = transport::solve_assignment(y, fleet, instance);
      middle[mask] = {z.objective, transport::charging_load(z, instance.horizon)};
    } catch (const transport::AssignmentInfeasible&) {
    }
  }

  for (const auto& lines : trees) {
    for (const auto& [mask, mid] : middle) {
      std::vector<int> hubs;
      for (int k = 0; k < H; ++k) {
        if (mask >> k & 1u) hubs.push_back(k);
      }
      const network::PlanDecision plan = network::make_plan(instance, lines, hubs);
      ++best.plans;
      const double inv = network::investment_cost(plan, instance);
      if (inv + mid.first >= best.objective) continue;
      const double loss = tree_worst_loss(instance, plan, mid.second, &best.evaluations);
      const double total = inv + mid.first + loss;
      if (total < best.objective) {
        best.objective = total;
        best.plan = plan;
        best.investment = inv;
        best.middle = mid.first;
        best.loss = loss;
      }
    }
  }
  return best;
}

}  // namespace coplan::decomp
