#include <algorithm>
#include <cmath>
#include <numeric>

#include "coplan/dispatch.hpp"

namespace coplan::dispatch {

namespace {

OperationInputs fixed_inputs(const network::PlanDecision& plan, const Table& hub_load_kw,
                             const io::InstanceSpec& instance, const std::vector<int>& periods) {
  OperationInputs in;
  for (int y : plan.y_line) in.lines.push_back(Switch{{}, static_cast<double>(y)});
  for (int y : plan.y_rcs) in.hubs.push_back(Switch{{}, static_cast<double>(y)});
  in.periods = periods;
  in.hub_load.resize(static_cast<std::size_t>(instance.num_hubs()));
  for (int k = 0; k < instance.num_hubs(); ++k) {
    for (int t : periods) {
      const double kw = hub_load_kw.empty() ? 0.0 : hub_load_kw[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
      in.hub_load[static_cast<std::size_t>(k)].emplace_back(kw / instance.bases.power_kva);
    }
  }
  return in;
}

bool ess_in_play(const network::PlanDecision& plan, const io::InstanceSpec& instance) {
  return instance.has_ess() && std::any_of(plan.y_rcs.begin(), plan.y_rcs.end(), [](int y) { return y != 0; });
}

struct BlockSolve {
  mp::SolveOutcome outcome;
  OperationVars vars;
};

BlockSolve solve_block(const OperationInputs& in, const DiuRealization& u, const io::InstanceSpec& instance,
                       bool relax_sub, bool relax_cap, bool relax_volt) {
  mp::ProgramBuilder b(mp::Sense::Minimize);
  BlockSolve s;
  s.vars = add_operation_block(b, instance, in, u, LossMode::ObjectiveSquares, relax_sub, relax_cap, relax_volt);
  const mp::Program prog = std::move(b).finish();
  s.outcome = mp::solve_with_gap(prog, 0.0);
  return s;
}

std::string diagnose(const OperationInputs& in, const DiuRealization& u, const io::InstanceSpec& instance) {
  const auto ok = [&](bool a, bool b, bool c) {
    try {
      return solve_block(in, u, instance, a, b, c).outcome.has_solution();
    } catch (const mp::ModelError&) {
      return false;
    }
  };
  if (ok(true, false, false)) return "substation limits";
  if (ok(false, true, false)) return "line capacity";
  if (ok(false, false, true)) return "voltage limits";
  if (ok(true, true, true)) return "combined substation, capacity and voltage limits";
  return "power balance";
}

DistFlowState empty_state(const io::InstanceSpec& instance) {
  const int T = instance.horizon;
  DistFlowState st;
  st.p_flow = zeros(instance.num_lines(), T);
  st.q_flow = zeros(instance.num_lines(), T);
  st.v_sq = zeros(instance.num_nodes(), T);
  st.p_sub.assign(static_cast<std::size_t>(T), 0.0);
  st.q_sub.assign(static_cast<std::size_t>(T), 0.0);
  st.e_ess = zeros(instance.num_hubs(), T + 1);
  st.p_ch = zeros(instance.num_hubs(), T);
  st.p_dis = zeros(instance.num_hubs(), T);
  return st;
}

void extract(const BlockSolve& s, const OperationInputs& in, const io::InstanceSpec& instance, DistFlowState& st) {
  const auto& out = s.outcome;
  const auto& ov = s.vars;
  for (std::size_t slot = 0; slot < in.periods.size(); ++slot) {
    const auto t = static_cast<std::size_t>(in.periods[slot]);
    for (int e = 0; e < instance.num_lines(); ++e) {
      const auto& p = ov.p[static_cast<std::size_t>(e)][slot];
      if (!p.valid()) continue;
      st.p_flow[static_cast<std::size_t>(e)][t] = out.value(p);
      st.q_flow[static_cast<std::size_t>(e)][t] = out.value(ov.q[static_cast<std::size_t>(e)][slot]);
    }
    for (int i = 0; i < instance.num_nodes(); ++i) st.v_sq[static_cast<std::size_t>(i)][t] = out.value(ov.v[static_cast<std::size_t>(i)][slot]);
    st.p_sub[t] = out.value(ov.p_sub[slot]);
    st.q_sub[t] = out.value(ov.q_sub[slot]);
    for (int k = 0; k < instance.num_hubs(); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      if (ov.ch[kk].empty()) continue;
      st.p_ch[kk][t] = out.value(ov.ch[kk][slot]);
      st.p_dis[kk][t] = out.value(ov.dis[kk][slot]);
      st.e_ess[kk][t] = out.value(ov.e[kk][slot]);
      st.e_ess[kk][t + 1] = out.value(ov.e[kk][slot + 1]);
    }
  }
}

}  // namespace

DistFlowState dispatch_min_loss_periods(const network::PlanDecision& plan, const Table& hub_load_kw,
                                        const DiuRealization& u, const io::InstanceSpec& instance,
                                        const std::vector<int>& periods) {
  DistFlowState st = empty_state(instance);
  std::vector<std::vector<int>> blocks;
  if (ess_in_play(plan, instance)) {
    blocks.push_back(periods);
  } else {
    for (int t : periods) blocks.push_back({t});
  }
  st.feasible = true;
  for (const auto& block : blocks) {
    const OperationInputs in = fixed_inputs(plan, hub_load_kw, instance, block);
    const BlockSolve s = solve_block(in, u, instance, false, false, false);
    if (!s.outcome.has_solution()) {
      st.feasible = false;
      st.binding_family = diagnose(in, u, instance);
      st.loss_cost = std::numeric_limits<double>::infinity();
      return st;
    }
    extract(s, in, instance, st);
  }
  st.loss_cost = 0.0;
  for (int e = 0; e < instance.num_lines(); ++e) {
    for (int t : periods) {
      const double p = st.p_flow[static_cast<std::size_t>(e)][static_cast<std::size_t>(t)];
      const double q = st.q_flow[static_cast<std::size_t>(e)][static_cast<std::size_t>(t)];
      st.loss_cost += loss_weight(instance, e, t) * (p * p + q * q);
    }
  }
  return st;
}

DistFlowState dispatch_min_loss(const network::PlanDecision& plan, const Table& hub_load_kw, const DiuRealization& u,
                                const io::InstanceSpec& instance) {
  std::vector<int> all(static_cast<std::size_t>(instance.horizon));
  std::iota(all.begin(), all.end(), 0);
  return dispatch_min_loss_periods(plan, hub_load_kw, u, instance, all);
}

std::vector<EssFlag> ess_relaxation_audit(const DistFlowState& state) {
  std::vector<EssFlag> flags;
  for (std::size_t k = 0; k < state.p_ch.size(); ++k) {
    for (std::size_t t = 0; t < state.p_ch[k].size(); ++t) {
      const double prod = state.p_ch[k][t] * state.p_dis[k][t];
      if (prod > 1e-8) flags.push_back({static_cast<int>(k), static_cast<int>(t), prod});
    }
  }
  return flags;
}

}  // namespace coplan::dispatch
