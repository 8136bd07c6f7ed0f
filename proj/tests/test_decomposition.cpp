#include <algorithm>
#include <cmath>

#include "coplan/decomposition.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace coplan;
using decomp::Phase;

namespace {

const std::string kToy = std::string(COPLAN_DATA_DIR) + "/toy6.json";

double rel(double ub, double x) { return (ub - x) / std::max(std::abs(ub), 1e-12); }

// Replays the bound bookkeeping on random master and oracle values, writing
// the trace a correct run would produce.
decomp::AlgoTrace simulate(gen::Rng& rng, double eps, double eps_tilde, double alpha) {
  decomp::AlgoTrace tr;
  double ub_bar = mp::kInf, lb_bar = 0.0, lb_k = 0.0;
  int i = 1, k = 1, scen = 0;
  std::vector<double> tol{0.0, 0.1};
  double next = 0.1;
  const double opt = rng.uniform(10.0, 100.0);
  for (int step = 0; step < 60; ++step) {
    const double e = tol[static_cast<std::size_t>(i)];
    double lb_i = std::max(lb_bar, opt * (1.0 - rng.uniform(0.0, 2.0 * e + 0.02)));
    if (rng.coin(0.15)) lb_i = lb_bar - rng.uniform(0.01, 1.0);
    lb_i = std::min(lb_i, opt);
    const double ub_i = std::max(lb_i, lb_i * (1.0 + rng.uniform(0.0, e)));
    if (lb_i >= lb_bar - 1e-9 * std::max(1.0, std::abs(lb_bar))) {
      k = i;
      lb_k = lb_i;
      lb_bar = ub_i;
    }
    ub_bar = std::min(ub_bar, opt * (1.0 + rng.uniform(0.0, 0.05) * (rng.coin(0.3) ? 0.0 : 1.0)));
    decomp::TraceRow r{i, Phase::Explore, k, ub_i, lb_i, ub_bar, lb_k, e, scen, rng.integer(1, 9), 1.0 * step};
    if (rel(ub_bar, lb_k) < eps) {
      r.phase = Phase::Terminate;
      tr.rows.push_back(r);
      break;
    }
    if (rel(ub_bar, ub_i) < eps_tilde) {
      r.phase = Phase::Exploit;
      i = k;
      lb_bar = lb_k;
      for (std::size_t j = static_cast<std::size_t>(k); j < tol.size(); ++j) tol[j] *= alpha;
      next *= alpha;
    } else {
      ++scen;
      ++i;
      tol.resize(static_cast<std::size_t>(i) + 1, next);
      tol[static_cast<std::size_t>(i)] = next;
    }
    tr.rows.push_back(r);
  }
  return tr;
}

network::PlanDecision deterministic_plan(const io::InstanceSpec& in, const transport::TransportScenario& fleet,
                                         double* value) {
  const auto mm = network::build_master(in, {dispatch::diu_lower_corner(in)}, fleet, 0.0);
  const auto out = mp::solve_with_gap(mm.program, 0.0);
  REQUIRE(out.has_solution());
  *value = out.incumbent_value;
  return mm.decode(out);
}

int consecutive_cap(double eps_tilde, double eps_up_init, double alpha) {
  if (eps_up_init <= eps_tilde) return 1;
  return static_cast<int>(std::ceil(std::log(eps_tilde / eps_up_init) / std::log(alpha))) + 1;
}

void check_run(const decomp::RunResult& r, const io::InstanceSpec& in, double slack) {
  const auto chk = decomp::check_trace(r.trace, r.epsilon, r.epsilon_tilde, slack);
  for (const auto& s : chk.issues) MESSAGE(s);
  CHECK(chk.ok);
  CHECK(r.terminated);
  CHECK(r.gap_certified < r.epsilon);
  CHECK(r.trace.rows.back().phase == Phase::Terminate);
  CHECK(r.explorations <= r.distinct_u);
  CHECK(static_cast<int>(r.scenarios.size()) == r.explorations);
  CHECK(r.max_consecutive_exploitations <= consecutive_cap(r.epsilon_tilde, r.eps_up_init, r.alpha));
  REQUIRE(r.exploitation_gaps.size() == r.exploitation_bounds.size());
  for (std::size_t j = 0; j < r.exploitation_gaps.size(); ++j) CHECK(r.exploitation_gaps[j] <= r.exploitation_bounds[j] + 1e-9);
  for (std::size_t a = 0; a < r.scenarios.size(); ++a) {
    CHECK(dispatch::diu_within_box(in, r.scenarios[a]));
    for (std::size_t b = 0; b < a; ++b) CHECK_FALSE(r.scenarios[a].approx_equal(r.scenarios[b], 1e-7));
  }
  CHECK(r.objective == doctest::Approx(r.investment + r.middle + r.loss).epsilon(1e-12));
  CHECK(network::validate_radial(r.plan, in).ok);
  for (const auto& d : r.draws) {
    CHECK(d.draw >= d.lo - 1e-9);
    CHECK(d.draw <= d.hi + 1e-9);
    CHECK(d.fleet_size >= in.fleet.lo);
    CHECK(d.fleet_size <= in.fleet.hi);
    if (d.mode == transport::IntervalMode::Lower) {
      CHECK(d.lo == in.fleet.lo);
      CHECK(d.hi == doctest::Approx(d.mu_prev));
    }
    if (d.mode == transport::IntervalMode::Upper) {
      CHECK(d.lo == doctest::Approx(d.mu_prev));
      CHECK(d.hi == in.fleet.hi);
    }
  }
}

}  // namespace

TEST_CASE("gap bound") {
  CHECK(decomp::gap_bound(0.02, {0.05}) == doctest::Approx(0.069).epsilon(1e-12));
  CHECK(decomp::gap_bound(0.02, {0.0, 0.0, 0.0}) == 0.02);
  CHECK(decomp::gap_bound(3e-5, {}) == 3e-5);
  gen::Rng rng(2);
  for (int c = 0; c < 250; ++c) {
    std::vector<double> h;
    for (int n = rng.integer(0, 6); n > 0; --n) h.push_back(rng.uniform(0.0, 0.5));
    const double et = rng.uniform(0.0, 0.1);
    double keep = 1.0 - et;
    for (double e : h) keep *= 1.0 - e;
    CHECK(decomp::gap_bound(et, h) == doctest::Approx(1.0 - keep).epsilon(1e-12));
    auto longer = h;
    longer.push_back(rng.uniform(1e-6, 0.5));
    CHECK(decomp::gap_bound(et, longer) > decomp::gap_bound(et, h));
  }
}

TEST_CASE("trace CSV keeps every column") {
  CHECK(decomp::AlgoTrace::columns() == std::vector<std::string>{"iteration", "phase", "k", "UB_i", "LB_i", "UB_bar",
                                                                 "LB_k", "eps_up", "scen_count", "fleet_draw", "wall_ms"});
  gen::Rng rng(4);
  for (int c = 0; c < 200; ++c) {
    const auto tr = simulate(rng, 1e-4, 4.9995e-5, 0.5);
    const auto back = decomp::AlgoTrace::from_csv(tr.to_csv());
    REQUIRE(back.rows.size() == tr.rows.size());
    for (std::size_t n = 0; n < tr.rows.size(); ++n) {
      const auto& a = tr.rows[n];
      const auto& b = back.rows[n];
      CHECK(a.iteration == b.iteration);
      CHECK(a.phase == b.phase);
      CHECK(a.k == b.k);
      CHECK(a.ub_i == b.ub_i);
      CHECK(a.lb_i == b.lb_i);
      CHECK(a.ub_bar == b.ub_bar);
      CHECK(a.lb_k == b.lb_k);
      CHECK(a.eps_up == b.eps_up);
      CHECK(a.scen_count == b.scen_count);
      CHECK(a.fleet_draw == b.fleet_draw);
      CHECK(a.wall_ms == b.wall_ms);
    }
  }
  decomp::AlgoTrace inf;
  inf.rows.push_back({1, Phase::Explore, 1, 3.0, 1.0, mp::kInf, 1.0, 0.1, 0, 5, 0.0});
  CHECK(std::isinf(decomp::AlgoTrace::from_csv(inf.to_csv()).rows[0].ub_bar));
  CHECK_THROWS(decomp::AlgoTrace::from_csv("iteration,phase\n1,explore\n"));
}

TEST_CASE("trace checker accepts correct bookkeeping and rejects tampering") {
  gen::Rng rng(6);
  const double eps = 1e-3, et = 4e-4;
  int tampered = 0;
  for (int c = 0; c < 300; ++c) {
    const auto tr = simulate(rng, eps, et, 0.5);
    const auto chk = decomp::check_trace(tr, eps, et, 1e-6);
    for (const auto& s : chk.issues) MESSAGE(s);
    REQUIRE(chk.ok);
    if (tr.rows.size() < 2) continue;
    auto bad = tr;
    const auto n = static_cast<std::size_t>(rng.integer(1, static_cast<int>(tr.rows.size()) - 1));
    auto& r = bad.rows[n];
    switch (rng.integer(0, 4)) {
      case 0: r.phase = r.phase == Phase::Explore ? Phase::Exploit : Phase::Explore; break;
      case 1: r.k += 1; break;
      case 2: r.ub_bar = bad.rows[n - 1].ub_bar * 1.01 + 1.0; break;
      case 3: r.scen_count += 1; break;
      case 4: r.lb_k = r.ub_bar * 1.5 + 1.0; break;
    }
    ++tampered;
    CHECK_FALSE(decomp::check_trace(bad, eps, et, 1e-6).ok);
  }
  CHECK(tampered >= 200);
}

TEST_CASE("toy6 runs") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  const auto a = decomp::run_aiccg(in, p);
  check_run(a, in, 5e-3);
  const auto oracle = decomp::exhaustive_oracle(in, a.fleet);
  CHECK(std::abs(a.objective - oracle.objective) / oracle.objective <= 1e-3);
  CHECK(a.explorations >= 1);

  const auto c = decomp::run_ccg(in, p);
  check_run(c, in, 1e-6);
  CHECK(c.exploitations == 0);
  CHECK(c.objective == doctest::Approx(decomp::exhaustive_oracle(in, c.fleet).objective).epsilon(1e-4));
  CHECK(c.draws.empty());

  const auto ic = decomp::run_iccg(in, p);
  check_run(ic, in, 1e-6);
  CHECK(std::abs(ic.objective - c.objective) / c.objective <= 2e-4);

  auto exact = p;
  exact.eps_up_init = 0.0;
  const auto e = decomp::run_iccg(in, exact);
  check_run(e, in, 1e-6);
  CHECK(e.exploitations == 0);
  for (const auto& row : e.trace.rows) CHECK(row.k == row.iteration);
}

TEST_CASE("degenerate box and point-mass fleet") {
  const auto in = io::with_diu_width(io::load_instance(kToy), 0.0);
  io::AlgoParams p;
  p.fleet_sigma = 1e-9;
  const auto r = decomp::run_aiccg(in, p);
  check_run(r, in, 5e-3);
  CHECK(r.explorations == 1);
  CHECK(r.exploitations <= static_cast<int>(std::ceil(std::log(r.epsilon_tilde) / std::log(p.alpha))));
  for (const auto& d : r.draws) CHECK(d.fleet_size == 5);
  double direct = 0.0;
  deterministic_plan(in, transport::fixed_fleet_scenario(in, p.seed, 5), &direct);
  CHECK(std::abs(r.objective - direct) / direct <= 1e-4);

  const auto ic = decomp::run_iccg(in, p);
  check_run(ic, in, 1e-6);
  double at_hi = 0.0;
  const auto plan = deterministic_plan(in, transport::fixed_fleet_scenario(in, p.seed, in.fleet.hi), &at_hi);
  CHECK(network::plan_fingerprint(ic.plan, in) == network::plan_fingerprint(plan, in));
  CHECK(std::abs(ic.objective - at_hi) / at_hi <= 1e-4);

  const auto c = decomp::run_ccg(in, p);
  CHECK(c.iterations <= 2);
  CHECK(c.terminated);
}

TEST_CASE("iteration cap returns an honest incumbent") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  p.max_iterations = 1;
  const auto r = decomp::run_ccg(in, p);
  CHECK_FALSE(r.terminated);
  CHECK(r.iterations == 1);
  CHECK(r.gap_certified == doctest::Approx(rel(r.objective, r.lower_bound)));
  CHECK(r.gap_certified >= r.epsilon);
}

TEST_CASE("invalid parameters are rejected before solving") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  p.alpha = 1.5;
  CHECK_THROWS_AS(decomp::run_aiccg(in, p), io::ValidationError);
  CHECK(decomp::parse_algorithm("aiccg") == decomp::Algorithm::Aiccg);
  CHECK_FALSE(decomp::parse_algorithm("bogus").has_value());
}

TEST_CASE("bound sandwich and phase rules across random small grids") {
  gen::Rng rng(29);
  int runs = 0;
  for (int c = 0; c < 210; ++c) {
    gen::Shape shape;
    shape.nodes = rng.integer(3, 4);
    shape.extra_lines = rng.integer(0, 2);
    shape.hubs = 2;
    shape.horizon = 2;
    shape.uncertain = rng.integer(1, 3);
    shape.width = rng.uniform(0.1, 0.8);
    shape.fleet_hi = rng.integer(1, 3);
    const auto in = gen::random_instance(rng, shape);
    REQUIRE(io::validate_instance(in).empty());
    io::AlgoParams p;
    p.seed = static_cast<unsigned long long>(c + 1);
    p.epsilon = rng.coin() ? 1e-4 : 1e-3;
    p.alpha = rng.uniform(0.3, 0.7);
    p.eps_up_init = rng.uniform(0.0, 0.2);
    const auto algo = static_cast<decomp::Algorithm>(c % 3);
    if (algo == decomp::Algorithm::Aiccg) p.sandwich_slack = 0.2;
    const double slack = algo == decomp::Algorithm::Aiccg ? 0.2 : 1e-6;
    const auto r = decomp::run(algo, in, p);
    CAPTURE(c);
    check_run(r, in, slack);
    if (algo == decomp::Algorithm::Ccg && c % 6 == 0) {
      CHECK(r.objective == doctest::Approx(decomp::exhaustive_oracle(in, r.fleet).objective).epsilon(p.epsilon));
    }
    ++runs;
  }
  CHECK(runs >= 200);
}
