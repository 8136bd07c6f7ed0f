#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "coplan/mathprog.hpp"
#include "coplan/transport.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace coplan;
using transport::Matrix;

namespace {

const std::string kToy = std::string(COPLAN_DATA_DIR) + "/toy6.json";

std::vector<io::HubSpec> hubs_1_to(int h) {
  std::vector<io::HubSpec> hubs;
  for (int k = 1; k <= h; ++k) hubs.push_back({k, k, 190.0});
  return hubs;
}

// Shortest path by enumerating every simple path.
double brute_path(const std::vector<std::vector<double>>& w, int from, int to) {
  const int h = static_cast<int>(w.size());
  std::vector<char> on(static_cast<std::size_t>(h), 0);
  double best = mp::kInf;
  std::function<void(int, double)> walk = [&](int v, double len) {
    if (v == to) {
      best = std::min(best, len);
      return;
    }
    on[static_cast<std::size_t>(v)] = 1;
    for (int x = 0; x < h; ++x) {
      const double e = w[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)];
      if (!on[static_cast<std::size_t>(x)] && std::isfinite(e)) walk(x, len + e);
    }
    on[static_cast<std::size_t>(v)] = 0;
  };
  walk(from, 0.0);
  return best;
}

// Cheapest in-window schedule by enumerating LP vertices: every period but one
// sits at a power limit and the free period closes the energy balance.
double brute_schedule_cost(const io::InstanceSpec& in, double init, double target) {
  const auto& ev = in.ev;
  const auto& C = ev.charge_window;
  const int w = static_cast<int>(C.size());
  const double need = std::max(target, ev.e_min_kwh) - init;
  double best = mp::kInf;
  for (int free = -1; free < w; ++free) {
    for (unsigned mask = 0; mask < (1u << w); ++mask) {
      double energy = 0.0;
      double cost = 0.0;
      for (int j = 0; j < w; ++j) {
        if (j == free) continue;
        const double p = (mask >> j & 1u) ? ev.p_max_kw : ev.p_min_kw;
        energy += p;
        cost += 365.0 * in.tou_prices[static_cast<std::size_t>(C[static_cast<std::size_t>(j)])] * p;
      }
      double p_free = 0.0;
      if (free >= 0) {
        p_free = std::max(need - energy, ev.p_min_kw);
        if (p_free > ev.p_max_kw + 1e-12) continue;
        energy += p_free;
        cost += 365.0 * in.tou_prices[static_cast<std::size_t>(C[static_cast<std::size_t>(free)])] * p_free;
      }
      if (energy < need - 1e-9 || init + energy > ev.e_max_kwh + 1e-9) continue;
      best = std::min(best, cost);
    }
  }
  return best;
}

double brute_assignment(const io::InstanceSpec& in, const std::vector<int>& y, const transport::TransportScenario& s) {
  const Matrix R = transport::shortest_distance_matrix(in);
  const int H = in.num_hubs();
  const int n = s.fleet_size;
  double best = mp::kInf;
  std::vector<int> pick(static_cast<std::size_t>(n), 0);
  std::function<void(int, double)> rec = [&](int u, double acc) {
    if (u == n) {
      for (int k = 0; k < H; ++k) {
        const int cnt = static_cast<int>(std::count(pick.begin(), pick.end(), k));
        if (cnt < in.hubs[static_cast<std::size_t>(k)].n_min || cnt > in.hubs[static_cast<std::size_t>(k)].n_max) return;
      }
      best = std::min(best, acc);
      return;
    }
    for (int k = 0; k < H; ++k) {
      if (!y[static_cast<std::size_t>(k)]) continue;
      pick[static_cast<std::size_t>(u)] = k;
      const double travel = 365.0 * in.ev.travel_cost_per_km() *
                            R[static_cast<std::size_t>(s.arrival_hub[static_cast<std::size_t>(u)])][static_cast<std::size_t>(k)];
      rec(u + 1, acc + travel);
    }
  };
  double charging = 0.0;
  for (int u = 0; u < n; ++u) {
    charging += brute_schedule_cost(in, s.soc_init[static_cast<std::size_t>(u)], s.soc_target[static_cast<std::size_t>(u)]);
  }
  rec(0, charging);
  return best;
}

transport::TransportScenario manual(const std::vector<int>& arrivals, const std::vector<double>& init,
                                    const std::vector<double>& target) {
  transport::TransportScenario s;
  s.fleet_size = static_cast<int>(arrivals.size());
  s.arrival_hub = arrivals;
  s.soc_init = init;
  s.soc_target = target;
  return s;
}

// Composite Simpson quadrature of the truncated-normal mean.
double tn_mean_quadrature(double mu, double sigma, double lo, double hi) {
  const int n = 20000;
  const double h = (hi - lo) / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = std::exp(-0.5 * std::pow((x - mu) / sigma, 2));
    num += wgt * x * f;
    den += wgt * f;
  }
  return num / den;
}

}  // namespace

TEST_CASE("distance matrix examples") {
  SUBCASE("chain distances add up") {
    const std::vector<io::HubEdgeSpec> edges{{1, 2, 1.0}, {2, 4, 1.0}, {4, 5, 1.0}, {2, 3, 1.0}};
    const Matrix R = transport::shortest_distance_matrix(hubs_1_to(5), edges);
    CHECK(R[0][4] == doctest::Approx(R[0][1] + R[1][3] + R[3][4]));
    CHECK(R[0][4] == doctest::Approx(3.0));
    CHECK(R[2][4] == doctest::Approx(3.0));
  }
  SUBCASE("single hub") {
    const Matrix R = transport::shortest_distance_matrix(hubs_1_to(1), {});
    REQUIRE(R.size() == 1);
    CHECK(R[0].size() == 1);
    CHECK(R[0][0] == 0.0);
  }
  SUBCASE("disconnected graph names its components") {
    try {
      transport::shortest_distance_matrix(hubs_1_to(4), {{1, 2, 1.0}, {3, 4, 2.0}});
      FAIL("expected an error");
    } catch (const transport::TransportError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("{1,2}") != std::string::npos);
      CHECK(msg.find("{3,4}") != std::string::npos);
    }
  }
  SUBCASE("toy fixture takes the shorter detour") {
    const Matrix R = transport::shortest_distance_matrix(io::load_instance(kToy));
    CHECK(R[0][4] == doctest::Approx(2.7));
    CHECK(R[1][2] == doctest::Approx(2.5));
  }
}

TEST_CASE("distance matrix against simple-path enumeration") {
  gen::Rng rng(31);
  for (int c = 0; c < 250; ++c) {
    const int h = rng.integer(2, 6);
    std::vector<io::HubEdgeSpec> edges;
    for (int k = 2; k <= h; ++k) edges.push_back({rng.integer(1, k - 1), k, rng.uniform(0.1, 3.0)});
    for (int x = rng.integer(0, 5); x > 0; --x) edges.push_back({rng.integer(1, h), rng.integer(1, h), rng.uniform(0.1, 3.0)});
    std::vector<std::vector<double>> w(static_cast<std::size_t>(h), std::vector<double>(static_cast<std::size_t>(h), mp::kInf));
    for (const auto& e : edges) {
      if (e.a == e.b) continue;
      auto& ab = w[static_cast<std::size_t>(e.a - 1)][static_cast<std::size_t>(e.b - 1)];
      ab = std::min(ab, e.distance_km);
      w[static_cast<std::size_t>(e.b - 1)][static_cast<std::size_t>(e.a - 1)] = ab;
    }
    const Matrix R = transport::shortest_distance_matrix(hubs_1_to(h), edges);
    for (int a = 0; a < h; ++a) {
      CHECK(R[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)] == 0.0);
      for (int b = 0; b < h; ++b) {
        const double r = R[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        CHECK(r == R[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]);
        if (a != b) CHECK(r == doctest::Approx(brute_path(w, a, b)).epsilon(1e-12));
        for (int m = 0; m < h; ++m) {
          CHECK(r <= R[static_cast<std::size_t>(a)][static_cast<std::size_t>(m)] + R[static_cast<std::size_t>(m)][static_cast<std::size_t>(b)] + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("normal helpers") {
  CHECK(transport::normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(transport::normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  for (double p : {1e-10, 1e-4, 0.02, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    CHECK(transport::normal_cdf(transport::normal_quantile(p)) == doctest::Approx(p).epsilon(1e-11));
  }
}

TEST_CASE("truncated normal mean") {
  const transport::TruncatedNormal tn{3500.0, 200.0, 2987.0, 4011.0};
  const double oracle = tn_mean_quadrature(3500.0, 200.0, 2987.0, 4011.0);
  CHECK(tn.mean() == doctest::Approx(oracle).epsilon(1e-8));
  std::mt19937_64 rng(2024);
  double sum = 0.0;
  double lo = mp::kInf, hi = -mp::kInf;
  for (int d = 0; d < 10000; ++d) {
    const double x = tn.sample(rng);
    sum += x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(std::abs(sum / 10000 - oracle) / oracle < 0.01);
  CHECK(lo >= 2987.0);
  CHECK(hi <= 4011.0);
  const transport::TruncatedNormal skew{0.0, 1.0, 1.0, 3.0};
  CHECK(skew.mean() == doctest::Approx(tn_mean_quadrature(0.0, 1.0, 1.0, 3.0)).epsilon(1e-8));
}

TEST_CASE("degenerate sampling") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  p.fleet_sigma = 1e-9;
  for (long d = 0; d < 20; ++d) {
    CHECK(transport::sample_scenario(in, p, transport::IntervalMode::Full, 5.0, d).fleet_size == 5);
    CHECK(transport::sample_scenario(in, p, transport::IntervalMode::Lower, 4.4, d).fleet_size == 4);
    CHECK(transport::sample_scenario(in, p, transport::IntervalMode::Upper, 5.6, d).fleet_size == 6);
    CHECK(transport::sample_scenario(in, p, transport::IntervalMode::AtUpperBound, 5.0, d).fleet_size == 6);
  }
  const auto collapsed = transport::sample_scenario(in, io::AlgoParams{}, transport::IntervalMode::Lower, 4.0, 0);
  CHECK(collapsed.fleet_size == 4);
  CHECK_FALSE(collapsed.note.empty());
}

TEST_CASE("arrivals follow the population weights") {
  auto in = io::load_instance(kToy);
  for (auto& h : in.hubs) h.pop_weight = 0.0;
  in.hubs[2].pop_weight = 1.0;
  for (unsigned long long seed = 1; seed <= 5; ++seed) {
    const auto s = transport::fixed_fleet_scenario(in, seed, 6);
    const auto m = s.m_in(in.num_hubs());
    for (int u = 0; u < 6; ++u) {
      for (int k = 0; k < in.num_hubs(); ++k) CHECK(m[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)] == (k == 2 ? 1 : 0));
    }
  }
}

TEST_CASE("sampling is deterministic and nested") {
  const auto in = io::load_instance(kToy);
  io::AlgoParams p;
  gen::Rng rng(8);
  for (int c = 0; c < 200; ++c) {
    p.seed = static_cast<unsigned long long>(rng.integer(1, 1000000));
    const auto mode = static_cast<transport::IntervalMode>(rng.integer(0, 3));
    const double mu = rng.uniform(4.0, 6.0);
    const long d = rng.integer(0, 50);
    const auto a = transport::sample_scenario(in, p, mode, mu, d);
    const auto b = transport::sample_scenario(in, p, mode, mu, d);
    CHECK(transport::scenario_to_json(a) == transport::scenario_to_json(b));
    CHECK(a.fleet_size >= in.fleet.lo);
    CHECK(a.fleet_size <= in.fleet.hi);
    const auto big = transport::fixed_fleet_scenario(in, p.seed, 6);
    for (int u = 0; u < a.fleet_size; ++u) {
      CHECK(a.arrival_hub[static_cast<std::size_t>(u)] == big.arrival_hub[static_cast<std::size_t>(u)]);
      CHECK(a.soc_init[static_cast<std::size_t>(u)] == big.soc_init[static_cast<std::size_t>(u)]);
      CHECK(a.soc_init[static_cast<std::size_t>(u)] <= a.soc_target[static_cast<std::size_t>(u)]);
    }
    const auto back = transport::scenario_from_json(transport::scenario_to_json(a));
    CHECK(transport::scenario_to_json(back) == transport::scenario_to_json(a));
  }
}

TEST_CASE("assignment examples") {
  const auto in = io::load_instance(kToy);
  const Matrix R = transport::shortest_distance_matrix(in);
  const double cev = in.ev.travel_cost_per_km();
  SUBCASE("one open station takes every EV") {
    const std::vector<int> y{0, 0, 1, 0, 0};
    const auto s = manual({0, 4}, {20.0, 22.0}, {24.0, 25.0});
    const auto z = transport::solve_assignment(y, s, in);
    CHECK(z.m_se[2][0] == 1);
    CHECK(z.m_se[2][1] == 1);
    CHECK(z.travel_cost == doctest::Approx(365.0 * cev * (R[0][2] + R[4][2])).epsilon(1e-9));
  }
  SUBCASE("two EVs over two open hubs match brute force") {
    const std::vector<int> y{1, 0, 0, 1, 0};
    const auto s = manual({1, 2}, {20.0, 23.0}, {21.0, 23.5});
    CHECK(transport::solve_assignment(y, s, in).objective == doctest::Approx(brute_assignment(in, y, s)).epsilon(1e-9));
  }
  SUBCASE("a full EV only pays travel") {
    const std::vector<int> y{0, 1, 0, 0, 0};
    const auto s = manual({0}, {24.0}, {24.0});
    const auto z = transport::solve_assignment(y, s, in);
    for (double p : z.p_ut[0]) CHECK(p == 0.0);
    CHECK(z.charging_cost == 0.0);
    CHECK(z.objective == doctest::Approx(365.0 * cev * R[0][1]));
  }
  SUBCASE("no open station") {
    CHECK_THROWS_AS(transport::solve_assignment({0, 0, 0, 0, 0}, manual({0}, {20.0}, {24.0}), in),
                    transport::AssignmentInfeasible);
  }
}

TEST_CASE("charging load") {
  const auto in = io::load_instance(kToy);
  const std::vector<int> y{1, 1, 1, 1, 1};
  const auto empty = transport::solve_assignment(y, manual({}, {}, {}), in);
  for (const auto& row : transport::charging_load(empty, in.horizon)) {
    for (double v : row) CHECK(v == 0.0);
  }
  auto one = in;
  one.ev.p_min_kw = 0.0;
  const auto single = transport::solve_assignment({0, 1, 0, 0, 0}, manual({1}, {20.0}, {27.0}), one);
  const auto table = transport::charging_load(single, in.horizon);
  CHECK(table[1][0] == doctest::Approx(7.0));
  CHECK(table[1][1] == doctest::Approx(0.0));
  CHECK(table[0][0] == 0.0);
  const auto s = transport::fixed_fleet_scenario(in, 4, 6);
  const auto z = transport::solve_assignment({1, 0, 1, 0, 1}, s, in);
  const auto load = transport::charging_load(z, in.horizon);
  for (int t = 0; t < in.horizon; ++t) {
    double col = 0.0, evs = 0.0;
    for (const auto& row : load) col += row[static_cast<std::size_t>(t)];
    for (const auto& p : z.p_ut) evs += p[static_cast<std::size_t>(t)];
    CHECK(col == doctest::Approx(evs).epsilon(1e-12));
  }
}

TEST_CASE("assignment feasibility, linking and optimality across random cases") {
  gen::Rng rng(17);
  for (int c = 0; c < 220; ++c) {
    gen::Shape shape;
    shape.nodes = rng.integer(3, 7);
    shape.hubs = rng.integer(1, 4);
    shape.horizon = rng.integer(2, 4);
    shape.fleet_hi = rng.integer(0, 3);
    auto in = gen::random_instance(rng, shape);
    if (rng.coin(0.3)) in.ev.p_min_kw = rng.uniform(0.0, 1.0);
    const bool bounded = rng.coin(0.2) && in.num_hubs() >= 2;
    if (bounded) in.hubs[0].n_max = 1.0;
    REQUIRE(io::validate_instance(in).empty());
    std::vector<int> y(static_cast<std::size_t>(in.num_hubs()), 0);
    for (auto& v : y) v = rng.coin(0.6);
    y[static_cast<std::size_t>(rng.integer(0, in.num_hubs() - 1))] = 1;
    if (bounded) y[1] = 1;
    const auto s = transport::fixed_fleet_scenario(in, static_cast<unsigned long long>(c + 1), rng.integer(in.fleet.lo, in.fleet.hi));
    const auto z = transport::solve_assignment(y, s, in);
    CHECK(transport::check_assignment(z, y, s, in).empty());
    // Independent re-check of linking and the energy balance.
    for (int u = 0; u < s.fleet_size; ++u) {
      int ones = 0;
      double energy = s.soc_init[static_cast<std::size_t>(u)];
      for (int k = 0; k < in.num_hubs(); ++k) {
        const int m = z.m_se[static_cast<std::size_t>(k)][static_cast<std::size_t>(u)];
        ones += m;
        CHECK(m <= y[static_cast<std::size_t>(k)]);
        for (int t = 0; t < in.horizon; ++t) {
          CHECK(std::abs(z.p_ev(k, u, t) - m * z.p_ut[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)]) <= 1e-6);
        }
      }
      CHECK(ones == 1);
      for (int t = 0; t < in.horizon; ++t) energy += z.p_ut[static_cast<std::size_t>(u)][static_cast<std::size_t>(t)];
      CHECK(energy >= s.soc_target[static_cast<std::size_t>(u)] - 1e-6);
      CHECK(energy <= in.ev.e_max_kwh + 1e-6);
    }
    if (s.fleet_size <= 3) CHECK(z.objective == doctest::Approx(brute_assignment(in, y, s)).epsilon(1e-8));
    if (!bounded) CHECK(transport::closest_assignment(y, s, in).objective == doctest::Approx(z.objective).epsilon(1e-9));
    // Raising one in-window price never lowers the optimum.
    auto pricier = in;
    const int t = in.ev.charge_window[static_cast<std::size_t>(rng.integer(0, static_cast<int>(in.ev.charge_window.size()) - 1))];
    pricier.tou_prices[static_cast<std::size_t>(t)] *= rng.uniform(1.0, 3.0);
    CHECK(transport::solve_assignment(y, s, pricier).objective >= z.objective - 1e-9);
  }
}
