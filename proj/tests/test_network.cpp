#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "coplan/dispatch.hpp"
#include "coplan/network.hpp"
#include "coplan/transport.hpp"
#include "doctest.h"
#include "gen.hpp"

using namespace coplan;

namespace {

const std::string kToy = std::string(COPLAN_DATA_DIR) + "/toy6.json";

io::InstanceSpec bare(int n, const std::vector<std::pair<int, int>>& edges) {
  io::InstanceSpec in;
  for (int i = 1; i <= n; ++i) in.nodes.push_back({i, i == 1 ? io::NodeKind::Root : io::NodeKind::Load, i == 1 ? 0.0 : 1.0});
  for (auto [a, b] : edges) in.lines.push_back({a, b, 1.0, 0.01, 0.007, 3.0, 23.3});
  in.rcs_min_count = 0;
  return in;
}

double annuity_by_sum(double d, double years) {
  double pv = 0.0;
  for (int t = 1; t <= static_cast<int>(years); ++t) pv += std::pow(1.0 + d, -t);
  return 1.0 / pv;
}

// Spanning-tree test by union-find, independent of the library.
bool is_spanning_tree(const io::InstanceSpec& in, const std::vector<int>& lines) {
  const int n = in.num_nodes();
  if (static_cast<int>(lines.size()) != n - 1) return false;
  std::vector<int> uf(static_cast<std::size_t>(n));
  std::iota(uf.begin(), uf.end(), 0);
  std::function<int(int)> find = [&](int x) { return uf[static_cast<std::size_t>(x)] == x ? x : uf[static_cast<std::size_t>(x)] = find(uf[static_cast<std::size_t>(x)]); };
  for (int e : lines) {
    const int a = find(in.node_index(in.lines[static_cast<std::size_t>(e)].from));
    const int b = find(in.node_index(in.lines[static_cast<std::size_t>(e)].to));
    if (a == b) return false;
    uf[static_cast<std::size_t>(a)] = b;
  }
  return true;
}

double kruskal(const io::InstanceSpec& in) {
  std::vector<int> order(static_cast<std::size_t>(in.num_lines()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return network::line_annual_cost(in, a) < network::line_annual_cost(in, b);
  });
  std::vector<int> uf(static_cast<std::size_t>(in.num_nodes()));
  std::iota(uf.begin(), uf.end(), 0);
  std::function<int(int)> find = [&](int x) { return uf[static_cast<std::size_t>(x)] == x ? x : uf[static_cast<std::size_t>(x)] = find(uf[static_cast<std::size_t>(x)]); };
  double cost = 0.0;
  for (int e : order) {
    const int a = find(in.node_index(in.lines[static_cast<std::size_t>(e)].from));
    const int b = find(in.node_index(in.lines[static_cast<std::size_t>(e)].to));
    if (a == b) continue;
    uf[static_cast<std::size_t>(a)] = b;
    cost += network::line_annual_cost(in, e);
  }
  return cost;
}

double best_siting(const io::InstanceSpec& in, const transport::TransportScenario& fleet) {
  double best = mp::kInf;
  const int H = in.num_hubs();
  for (unsigned mask = 0; mask < (1u << H); ++mask) {
    std::vector<int> y(static_cast<std::size_t>(H), 0);
    double cost = 0.0;
    for (int k = 0; k < H; ++k) {
      if (mask >> k & 1u) {
        y[static_cast<std::size_t>(k)] = 1;
        cost += network::hub_annual_cost(in, k);
      }
    }
    if (std::count(y.begin(), y.end(), 1) < in.rcs_min_count) continue;
    try {
      cost += transport::solve_assignment(y, fleet, in).objective;
    } catch (const transport::AssignmentInfeasible&) {
      continue;
    }
    best = std::min(best, cost);
  }
  return best;
}

std::vector<int> all_hubs(const io::InstanceSpec& in) {
  std::vector<int> h(static_cast<std::size_t>(in.num_hubs()));
  std::iota(h.begin(), h.end(), 0);
  return h;
}

}  // namespace

TEST_CASE("investment cost examples") {
  io::InstanceSpec in = io::load_instance(kToy);
  CHECK(network::investment_cost(network::make_plan(in, {}, {}), in) == 0.0);
  in.lines[0].length_km = 1.0;
  CHECK(network::line_annual_cost(in, 0) == doctest::Approx(1.86965).epsilon(1e-5));
  CHECK(network::investment_cost(network::make_plan(in, {0}, {}), in) == doctest::Approx(23.30 * annuity_by_sum(0.05, 20)));
  // Hub 1 is a PV-EV station at 194.50 split across 20- and 30-year assets.
  const double mixed = 194.50 * (0.6 * annuity_by_sum(0.05, 20) + 0.4 * annuity_by_sum(0.05, 30));
  CHECK(network::hub_annual_cost(in, 0) == doctest::Approx(mixed).epsilon(1e-12));
  CHECK(network::investment_cost(network::make_plan(in, {0}, {0}), in) ==
        doctest::Approx(1.86965 + mixed).epsilon(1e-5));
}

TEST_CASE("radial validation examples") {
  SUBCASE("path is radial") {
    const auto in = bare(3, {{1, 2}, {2, 3}});
    const auto rep = network::validate_radial(network::make_plan(in, {0, 1}, {}), in);
    CHECK(rep.ok);
    CHECK_FALSE(rep.pseudo_loop);
  }
  SUBCASE("triangle fails on edge count with a loop") {
    const auto in = bare(3, {{1, 2}, {2, 3}, {1, 3}});
    const auto rep = network::validate_radial(network::make_plan(in, {0, 1, 2}, {}), in);
    CHECK_FALSE(rep.ok);
    CHECK(rep.pseudo_loop);
    CHECK(std::any_of(rep.violations.begin(), rep.violations.end(),
                      [](const std::string& v) { return v.find("n-1") != std::string::npos; }));
  }
  SUBCASE("two tree components fail on the fictitious flow") {
    const auto in = bare(4, {{1, 2}, {3, 4}, {2, 3}});
    const auto rep = network::validate_radial(network::make_plan(in, {0, 1}, {}), in);
    CHECK_FALSE(rep.ok);
    CHECK_FALSE(rep.pseudo_loop);
    CHECK(std::any_of(rep.violations.begin(), rep.violations.end(),
                      [](const std::string& v) { return v.find("fictitious flow") != std::string::npos; }));
  }
  SUBCASE("too few stations") {
    auto in = bare(3, {{1, 2}, {2, 3}});
    in.hubs.push_back({1, 2, 190.0});
    in.rcs_min_count = 1;
    CHECK_FALSE(network::validate_radial(network::make_plan(in, {0, 1}, {}), in).ok);
    CHECK(network::validate_radial(network::make_plan(in, {0, 1}, {0}), in).ok);
  }
}

TEST_CASE("radiality agrees with an independent spanning-tree check") {
  gen::Rng rng(11);
  int trees = 0;
  for (int c = 0; c < 300; ++c) {
    gen::Shape shape;
    shape.nodes = rng.integer(3, 9);
    shape.extra_lines = rng.integer(0, 5);
    const auto in = gen::random_instance(rng, shape);
    const int count = in.num_nodes() - 1 + rng.integer(-1, 1) * (rng.coin(0.3) ? 1 : 0);
    const auto lines = gen::random_lines(rng, in.num_lines(), count);
    const auto plan = network::make_plan(in, lines, all_hubs(in));
    const bool tree = is_spanning_tree(in, lines);
    const auto rep = network::validate_radial(plan, in);
    CHECK_MESSAGE(rep.ok == tree, "case " << c);
    if (!tree) continue;
    ++trees;
    // Orientation: each load node has one parent, and the fictitious flow on the
    // incoming line is the demand of the subtree below it.
    const int n = in.num_nodes();
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int e : lines) {
      adj[static_cast<std::size_t>(in.node_index(in.lines[static_cast<std::size_t>(e)].from))].push_back(e);
      adj[static_cast<std::size_t>(in.node_index(in.lines[static_cast<std::size_t>(e)].to))].push_back(e);
    }
    std::function<int(int, int)> subtree = [&](int v, int via) {
      int size = 1;
      for (int e : adj[static_cast<std::size_t>(v)]) {
        if (e == via) continue;
        const auto& ln = in.lines[static_cast<std::size_t>(e)];
        const int w = in.node_index(ln.from) == v ? in.node_index(ln.to) : in.node_index(ln.from);
        const int below = subtree(w, e);
        const bool down = in.node_index(ln.from) == v;
        CHECK(plan.beta[static_cast<std::size_t>(e)][down ? 0 : 1] == 1);
        CHECK(plan.beta[static_cast<std::size_t>(e)][down ? 1 : 0] == 0);
        CHECK(std::abs(plan.fflow[static_cast<std::size_t>(e)]) == doctest::Approx(below));
        CHECK((plan.fflow[static_cast<std::size_t>(e)] > 0) == down);
        size += below;
      }
      return size;
    };
    CHECK(subtree(in.root_index(), -1) == n);
  }
  CHECK(trees >= 100);
}

TEST_CASE("investment and fingerprint ignore candidate-line order") {
  gen::Rng rng(5);
  for (int c = 0; c < 250; ++c) {
    gen::Shape shape;
    shape.nodes = rng.integer(3, 8);
    shape.extra_lines = rng.integer(0, 4);
    const auto in = gen::random_instance(rng, shape);
    const auto lines = gen::random_lines(rng, in.num_lines(), rng.integer(0, in.num_lines()));
    std::vector<int> hubs;
    for (int k = 0; k < in.num_hubs(); ++k) {
      if (rng.coin()) hubs.push_back(k);
    }
    auto shuffled = in;
    std::vector<int> perm(static_cast<std::size_t>(in.num_lines()));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> moved;
    for (int pos = 0; pos < in.num_lines(); ++pos) {
      const int e = perm[static_cast<std::size_t>(pos)];
      auto ln = in.lines[static_cast<std::size_t>(e)];
      if (rng.coin()) std::swap(ln.from, ln.to);
      shuffled.lines[static_cast<std::size_t>(pos)] = ln;
      if (std::find(lines.begin(), lines.end(), e) != lines.end()) moved.push_back(pos);
    }
    const auto a = network::make_plan(in, lines, hubs);
    const auto b = network::make_plan(shuffled, moved, hubs);
    CHECK(network::investment_cost(a, in) == doctest::Approx(network::investment_cost(b, shuffled)).epsilon(1e-12));
    CHECK(network::plan_fingerprint(a, in) == network::plan_fingerprint(b, shuffled));
  }
}

TEST_CASE("master with no scenarios is a spanning tree plus the best siting") {
  const auto in = io::load_instance(kToy);
  const auto fleet = transport::fixed_fleet_scenario(in, 1, in.fleet.hi);
  const auto mm = network::build_master(in, {}, fleet, 0.0);
  const auto out = mp::solve_with_gap(mm.program, 0.0);
  REQUIRE(out.has_solution());
  const double oracle = kruskal(in) + best_siting(in, fleet);
  CHECK(out.incumbent_value == doctest::Approx(oracle).epsilon(1e-7));
  CHECK(std::abs(out.value(mm.eta)) < 1e-7);
  const auto plan = mm.decode(out);
  CHECK(network::validate_radial(plan, in).ok);
  CHECK(mm.investment_value(out) == doctest::Approx(network::investment_cost(plan, in)).epsilon(1e-9));
}

TEST_CASE("master on random small grids matches the separable oracle") {
  gen::Rng rng(23);
  for (int c = 0; c < 8; ++c) {
    gen::Shape shape;
    shape.nodes = rng.integer(3, 5);
    shape.extra_lines = rng.integer(1, 2);
    shape.hubs = rng.integer(1, 3);
    shape.fleet_hi = 2;
    const auto in = gen::random_instance(rng, shape);
    REQUIRE(io::validate_instance(in).empty());
    const auto fleet = transport::fixed_fleet_scenario(in, 3, in.fleet.hi);
    const auto mm = network::build_master(in, {}, fleet, 0.0);
    const auto out = mp::solve_with_gap(mm.program, 0.0);
    REQUIRE(out.has_solution());
    CHECK(out.incumbent_value == doctest::Approx(kruskal(in) + best_siting(in, fleet)).epsilon(1e-7));
  }
}

TEST_CASE("adding scenarios never lowers the master value") {
  const auto in = io::load_instance(kToy);
  const auto fleet = transport::fixed_fleet_scenario(in, 1, in.fleet.hi);
  const auto coords = dispatch::diu_coordinates(in);
  std::vector<dispatch::DiuRealization> U;
  double prev = -mp::kInf;
  gen::Rng rng(3);
  for (int s = 0; s < 3; ++s) {
    const auto mm = network::build_master(in, U, fleet, 0.0);
    const auto out = mp::solve_with_gap(mm.program, 0.0);
    REQUIRE(out.has_solution());
    CHECK(out.incumbent_value >= prev - 1e-7 * std::abs(prev));
    prev = out.incumbent_value;
    const auto plan = mm.decode(out);
    CHECK(network::validate_radial(plan, in).ok);
    CHECK(static_cast<int>(plan.built_lines().size()) == in.num_nodes() - 1);
    std::vector<char> upper(coords.size());
    for (auto& b : upper) b = static_cast<char>(s == 0 ? 1 : rng.coin());
    U.push_back(dispatch::diu_vertex(in, coords, upper));
  }
  CHECK(prev > 0.0);
}

TEST_CASE("a floor above every plan cost lifts the master to the floor") {
  const auto in = io::load_instance(kToy);
  const auto fleet = transport::fixed_fleet_scenario(in, 1, in.fleet.hi);
  const auto mm = network::build_master(in, {}, fleet, 1000.0);
  const auto out = mp::solve_with_gap(mm.program, 1e-9);
  REQUIRE(out.has_solution());
  CHECK(out.incumbent_value == doctest::Approx(1000.0).epsilon(1e-7));
}
