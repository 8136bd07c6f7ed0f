#include <algorithm>
#include <chrono>
#include <cmath>

#include "coplan/decomposition.hpp"

namespace coplan::decomp {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ccg: return "ccg";
    case Algorithm::Iccg: return "iccg";
    case Algorithm::Aiccg: return "aiccg";
  }
  return "?";
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Exploit: return "exploit";
    case Phase::Explore: return "explore";
    case Phase::Terminate: return "terminate";
    case Phase::Halt: return "halt";
  }
  return "?";
}

std::optional<Algorithm> parse_algorithm(const std::string& name) {
  if (name == "ccg") return Algorithm::Ccg;
  if (name == "iccg") return Algorithm::Iccg;
  if (name == "aiccg") return Algorithm::Aiccg;
  return std::nullopt;
}

double gap_bound(double eps_tilde, const std::vector<double>& eps_up_history) {
  double b = eps_tilde;
  for (double e : eps_up_history) b += e * (1.0 - b);
  return b;
}

namespace {

constexpr double kDuplicateTol = 1e-7;

double rel_gap(double ub_bar, double other) {
  if (!std::isfinite(ub_bar)) return mp::kInf;
  return (ub_bar - other) / std::max(std::abs(ub_bar), 1e-12);
}

double sandwich_tol(double slack, double ub_bar) {
  return slack * std::max(1.0, std::isfinite(ub_bar) ? std::abs(ub_bar) : 1.0);
}

RunResult drive(Algorithm algo, const io::InstanceSpec& instance, const io::AlgoParams& params,
                const RunOptions& options) {
  if (auto issues = io::validate_instance(instance); !issues.empty()) throw io::ValidationError(std::move(issues));
  if (auto issues = io::validate_params(params); !issues.empty()) throw io::ValidationError(std::move(issues));
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const bool adaptive = algo == Algorithm::Aiccg;
  RunResult res;
  res.algorithm = algo;
  res.epsilon = params.epsilon;
  res.epsilon_tilde = params.resolved_epsilon_tilde();
  res.eps_up_init = algo == Algorithm::Ccg ? 0.0 : params.eps_up_init;
  res.alpha = params.alpha;
  const double slack = params.sandwich_slack >= 0.0 ? params.sandwich_slack : (adaptive ? 5e-3 : 1e-6);

  long draws = 0;
  double mu_prev = std::isnan(params.fleet_mu) ? instance.fleet.mu : params.fleet_mu;
  auto draw = [&](transport::IntervalMode mode) {
    auto s = transport::sample_scenario(instance, params, mode, mu_prev, draws++);
    res.draws.push_back({mode, mu_prev, s.interval.lo, s.interval.hi, s.draw, s.fleet_size});
    mu_prev = s.draw;
    if (!s.note.empty() && std::find(res.notes.begin(), res.notes.end(), s.note) == res.notes.end()) {
      res.notes.push_back(s.note);
    }
    return s;
  };
  transport::TransportScenario v_master =
      adaptive ? draw(transport::IntervalMode::Full)
               : transport::fixed_fleet_scenario(instance, params.seed, instance.fleet.hi);

  double ub_bar = mp::kInf;
  double lb_bar = 0.0;
  int i = 1;
  int k = 1;
  double lb_k = 0.0;
  double eps_next = res.eps_up_init;
  std::vector<double> eps_at{0.0, eps_next};  // indexed by i
  std::vector<dispatch::DiuRealization> returned;
  int consecutive = 0;

  while (true) {
    if (res.iterations >= params.max_iterations) {
      res.terminated = false;
      break;
    }
    // Upper level within gap eps_up^i.
    const double eps_i = eps_at[static_cast<std::size_t>(i)];
    // The floor c'y + eta >= LB_bar is applied by clamping: eta is unbounded
    // above, so the floored optimum is max(unfloored optimum, LB_bar).
    const network::MasterModel mm = network::build_master(instance, res.scenarios, v_master, 0.0);
    mp::SolveOptions so;
    so.gap = eps_i;
    so.time_limit_s = options.master_time_limit_s;
    so.objective_floor = lb_bar;
    const mp::SolveOutcome out = mp::solve_with_gap(mm.program, so);
    ++res.iterations;
    if (!out.has_solution()) {
      throw InfeasibleInstance("upper-level problem has no feasible plan (" + std::string(mp::to_string(out.status)) + ")");
    }
    const double ub_i = std::max(out.incumbent_value, lb_bar);
    const double lb_i = std::max(out.relaxation_value, lb_bar);
    if (lb_i >= lb_bar - 1e-9 * std::max(1.0, std::abs(lb_bar))) {
      k = i;
      lb_k = lb_i;
      lb_bar = ub_i;
    }

    // Middle level at the lower-path fleet, then the worst-case DIU.
    const network::PlanDecision plan = mm.decode(out);
    const transport::TransportScenario v_sub = adaptive ? draw(transport::IntervalMode::Lower) : v_master;
    transport::EvAssignment z;
    try {
      z = transport::solve_assignment(plan.y_rcs, v_sub, instance);
    } catch (const transport::AssignmentInfeasible& e) {
      throw InfeasibleInstance(std::string("middle level infeasible: ") + e.what());
    }
    const dispatch::WorstCase wc =
        dispatch::worst_case_diu(plan, transport::charging_load(z, instance.horizon), instance, options.oracle);
    const double inv = network::investment_cost(plan, instance);
    const double cand = inv + z.objective + wc.D;
    if (cand < ub_bar) {
      ub_bar = cand;
      res.plan = plan;
      res.investment = inv;
      res.middle = z.objective;
      res.loss = wc.D;
      res.fleet = v_sub;
      res.worst = wc.u;
    }
    if (std::none_of(returned.begin(), returned.end(),
                     [&](const dispatch::DiuRealization& r) { return r.approx_equal(wc.u, kDuplicateTol); })) {
      returned.push_back(wc.u);
    }

    TraceRow row;
    row.iteration = i;
    row.k = k;
    row.ub_i = ub_i;
    row.lb_i = lb_i;
    row.ub_bar = ub_bar;
    row.lb_k = lb_k;
    row.eps_up = eps_i;
    row.scen_count = static_cast<int>(res.scenarios.size());
    row.fleet_draw = v_sub.fleet_size;

    if (std::isfinite(ub_bar) && lb_k > ub_bar + sandwich_tol(slack, ub_bar)) {
      row.phase = Phase::Halt;
      row.wall_ms = elapsed_ms();
      res.trace.rows.push_back(row);
      throw BoundViolation("lower bound " + std::to_string(lb_k) + " exceeds upper bound " + std::to_string(ub_bar) +
                           " beyond the allowed slack");
    }

    // Optimality test and backtracking.
    const double gap = rel_gap(ub_bar, lb_k);
    if (gap < params.epsilon) {
      row.phase = Phase::Terminate;
      res.terminated = true;
    } else if (rel_gap(ub_bar, ub_i) < res.epsilon_tilde) {
      row.phase = Phase::Exploit;
      std::vector<double> history(eps_at.begin() + k, eps_at.begin() + i + 1);
      res.exploitation_gaps.push_back(gap);
      res.exploitation_bounds.push_back(gap_bound(res.epsilon_tilde, history));
      ++res.exploitations;
      res.max_consecutive_exploitations = std::max(res.max_consecutive_exploitations, ++consecutive);
      i = k;
      lb_bar = lb_k;
      for (std::size_t j = static_cast<std::size_t>(k); j < eps_at.size(); ++j) eps_at[j] *= params.alpha;
      eps_next *= params.alpha;
    } else {
      row.phase = Phase::Explore;
      if (std::any_of(res.scenarios.begin(), res.scenarios.end(),
                      [&](const dispatch::DiuRealization& r) { return r.approx_equal(wc.u, kDuplicateTol); })) {
        row.phase = Phase::Halt;
        row.wall_ms = elapsed_ms();
        res.trace.rows.push_back(row);
        throw BoundViolation("worst-case realization repeats a scenario already in U without closing the gap");
      }
      res.scenarios.push_back(wc.u);
      ++res.explorations;
      consecutive = 0;
      ++i;
      if (static_cast<std::size_t>(i) >= eps_at.size()) eps_at.resize(static_cast<std::size_t>(i) + 1, eps_next);
      eps_at[static_cast<std::size_t>(i)] = eps_next;
      if (adaptive) v_master = draw(transport::IntervalMode::Upper);
    }
    row.wall_ms = elapsed_ms();
    res.trace.rows.push_back(row);
    if (options.on_row) options.on_row(row);
    if (row.phase == Phase::Terminate) break;
  }

  res.objective = ub_bar;
  res.lower_bound = lb_k;
  res.gap_certified = rel_gap(ub_bar, lb_k);
  res.distinct_u = static_cast<int>(returned.size());
  res.wall_ms = elapsed_ms();
  return res;
}

}  // namespace

RunResult run_aiccg(const io::InstanceSpec& instance, const io::AlgoParams& params, const RunOptions& options) {
  return drive(Algorithm::Aiccg, instance, params, options);
}

RunResult run_iccg(const io::InstanceSpec& instance, const io::AlgoParams& params, const RunOptions& options) {
  return drive(Algorithm::Iccg, instance, params, options);
}

RunResult run_ccg(const io::InstanceSpec& instance, const io::AlgoParams& params, const RunOptions& options) {
  return drive(Algorithm::Ccg, instance, params, options);
}

RunResult run(Algorithm algorithm, const io::InstanceSpec& instance, const io::AlgoParams& params,
              const RunOptions& options) {
  return drive(algorithm, instance, params, options);
}

}  // namespace coplan::decomp
