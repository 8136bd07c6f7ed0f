#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "coplan/mathprog.hpp"
#include "doctest.h"

using namespace coplan::mp;

namespace {

// Vertex enumeration oracle for min c'x s.t. A x <= b, 0 <= x <= u (dense, tiny).
double brute_force_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                      const Eigen::VectorXd& u) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(A.rows());
  // Stack all constraints as G x <= h.
  Eigen::MatrixXd G(m + 2 * n, n);
  Eigen::VectorXd h(m + 2 * n);
  G.topRows(m) = A;
  h.head(m) = b;
  for (int j = 0; j < n; ++j) {
    G.row(m + j).setZero();
    G(m + j, j) = -1.0;
    h[m + j] = 0.0;
    G.row(m + n + j).setZero();
    G(m + n + j, j) = 1.0;
    h[m + n + j] = u[j];
  }
  const int total = m + 2 * n;
  double best = INFINITY;
  std::vector<int> pick(static_cast<std::size_t>(n));
  std::vector<bool> mask(static_cast<std::size_t>(total), false);
  std::fill(mask.begin(), mask.begin() + n, true);
  do {
    Eigen::MatrixXd S(n, n);
    Eigen::VectorXd r(n);
    int k = 0;
    for (int i = 0; i < total; ++i) {
      if (mask[static_cast<std::size_t>(i)]) {
        S.row(k) = G.row(i);
        r[k] = h[i];
        ++k;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible()) continue;
    Eigen::VectorXd x = lu.solve(r);
    if (((G * x - h).array() <= 1e-9).all()) best = std::min(best, c.dot(x));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace

TEST_CASE("empty program solves to zero") {
  ProgramBuilder b(Sense::Minimize);
  Program p = std::move(b).finish();
  const auto out = solve_with_gap(p, 0.0);
  CHECK(out.status == SolveStatus::OptimalWithinGap);
  CHECK(out.incumbent_value == doctest::Approx(0.0));
}

TEST_CASE("maximizing a single binary gives one") {
  ProgramBuilder b(Sense::Maximize);
  auto x = b.add_binary("b");
  b.set_objective(LinearExpr{}.add(x, 1.0));
  const auto out = solve_with_gap(std::move(b).finish(), 0.0);
  CHECK(out.status == SolveStatus::OptimalWithinGap);
  CHECK(out.incumbent_value == doctest::Approx(1.0));
  CHECK(out.value(x) == 1.0);
}

TEST_CASE("lower bound row") {
  ProgramBuilder b(Sense::Minimize);
  auto x = b.add_continuous(0.0, kInf, "x");
  b.add_row(LinearExpr{}.add(x, 1.0), RowSense::GreaterEqual, 3.0);
  b.set_objective(LinearExpr{}.add(x, 1.0));
  const auto out = solve_with_gap(std::move(b).finish(), 0.0);
  CHECK(out.incumbent_value == doctest::Approx(3.0));
}

TEST_CASE("binary knapsack") {
  auto build = [] {
    ProgramBuilder b(Sense::Maximize);
    auto a = b.add_binary("a");
    auto c = b.add_binary("b");
    b.add_row(LinearExpr{}.add(a, 1.0).add(c, 1.0), RowSense::LessEqual, 1.0);
    b.set_objective(LinearExpr{}.add(a, 3.0).add(c, 2.0));
    return std::move(b).finish();
  };
  const auto exact = solve_with_gap(build(), 0.0);
  CHECK(exact.incumbent_value == doctest::Approx(3.0));
  CHECK(exact.assignment[0] == 1.0);
  const auto loose = solve_with_gap(build(), 0.5);
  CHECK(loose.status == SolveStatus::OptimalWithinGap);
  CHECK(loose.gap <= 0.5);
  CHECK(loose.relaxation_value >= loose.incumbent_value - 1e-9);
}

TEST_CASE("half square with lower bound") {
  ProgramBuilder b(Sense::Minimize);
  auto x = b.add_continuous(0.0, kInf, "x");
  b.add_row(LinearExpr{}.add(x, 1.0), RowSense::GreaterEqual, 2.0);
  b.add_objective_square(x, 0.5);
  const auto out = solve_with_gap(std::move(b).finish(), 0.0);
  CHECK(out.status == SolveStatus::OptimalWithinGap);
  CHECK(out.incumbent_value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(out.value(x) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("unconstrained quadratic with linear term") {
  // min (x - 3)^2 = x^2 - 6x + 9 over free x
  ProgramBuilder b(Sense::Minimize);
  auto x = b.add_free("x");
  b.set_objective(LinearExpr{9.0}.add(x, -6.0));
  b.add_objective_square(x, 1.0);
  const auto out = solve_with_gap(std::move(b).finish(), 0.0);
  CHECK(out.status == SolveStatus::OptimalWithinGap);
  CHECK(out.value(x) == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(out.incumbent_value == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("quadratic row is respected") {
  // max x + y s.t. x^2 + y^2 <= 2  -> x = y = 1
  ProgramBuilder b(Sense::Maximize);
  auto x = b.add_free("x");
  auto y = b.add_free("y");
  b.add_quad_row({{{x, 1.0}, {y, 1.0}}, {}, 2.0, "disk"});
  b.set_objective(LinearExpr{}.add(x, 1.0).add(y, 1.0));
  const auto out = solve_with_gap(std::move(b).finish(), 1e-6);
  CHECK(out.status == SolveStatus::OptimalWithinGap);
  CHECK(out.incumbent_value == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("infeasible and unbounded programs") {
  {
    ProgramBuilder b(Sense::Minimize);
    auto x = b.add_continuous(0.0, 1.0);
    b.add_row(LinearExpr{}.add(x, 1.0), RowSense::GreaterEqual, 2.0);
    b.set_objective(LinearExpr{}.add(x, 1.0));
    const auto out = solve_with_gap(std::move(b).finish(), 0.0);
    CHECK(out.status == SolveStatus::Infeasible);
    CHECK_FALSE(out.has_solution());
  }
  {
    ProgramBuilder b(Sense::Minimize);
    auto x = b.add_free();
    b.set_objective(LinearExpr{}.add(x, 1.0));
    CHECK(solve_with_gap(std::move(b).finish(), 0.0).status == SolveStatus::Unbounded);
  }
}

TEST_CASE("big-M indicator examples") {
  for (double o : {0.0, 1.0}) {
    ProgramBuilder b(Sense::Maximize);
    auto ind = b.add_binary("o");
    b.set_bounds(ind, o, o);
    auto pi = b.add_continuous(0.0, 10.0, "pi");
    add_bigM_indicator(b, ind, LinearExpr{}.add(pi, 1.0), 10.0, BigMMode::UpperWhenOff);
    b.set_objective(LinearExpr{}.add(pi, 1.0));
    const auto out = solve_with_gap(std::move(b).finish(), 0.0);
    CHECK(out.incumbent_value == doctest::Approx(10.0 * o));
  }
  ProgramBuilder b(Sense::Minimize);
  auto ind = b.add_binary();
  CHECK_THROWS_AS(add_bigM_indicator(b, ind, LinearExpr{}, 0.0), ModelError);
  CHECK_THROWS_AS(add_bigM_indicator(b, ind, LinearExpr{}, -1.0), ModelError);
}

TEST_CASE("complementarity pair never allows both positive") {
  // pi <= M o, slack <= M (1 - o); try to make both positive.
  for (double o : {0.0, 1.0}) {
    ProgramBuilder b(Sense::Maximize);
    auto ind = b.add_binary("o");
    b.set_bounds(ind, o, o);
    auto pi = b.add_continuous(0.0, 5.0, "pi");
    auto slack = b.add_continuous(0.0, 5.0, "s");
    add_bigM_indicator(b, ind, LinearExpr{}.add(pi, 1.0), 5.5, BigMMode::UpperWhenOff);
    add_bigM_indicator(b, ind, LinearExpr{}.add(slack, 1.0), 5.5, BigMMode::UpperWhenOn);
    b.set_objective(LinearExpr{}.add(pi, 1.0).add(slack, 1.0));
    const auto out = solve_with_gap(std::move(b).finish(), 0.0);
    REQUIRE(out.has_solution());
    CHECK(std::min(out.value(pi), out.value(slack)) <= 1e-9);
    CHECK(out.incumbent_value == doctest::Approx(5.0));
  }
}

TEST_CASE("big_m_for uses interval bounds with safety factor") {
  ProgramBuilder b(Sense::Minimize);
  auto x = b.add_continuous(-2.0, 3.0);
  auto y = b.add_continuous(0.0, 1.0);
  const LinearExpr e = LinearExpr{}.add(x, 2.0).add(y, -1.0);
  const Interval r = b.bounds_of(e);
  CHECK(r.lo == doctest::Approx(-5.0));
  CHECK(r.hi == doctest::Approx(6.0));
  CHECK(b.big_m_for(e) == doctest::Approx(6.6));
  auto f = b.add_continuous(0.0, kInf);
  CHECK_THROWS_AS(b.big_m_for(LinearExpr{}.add(f, 1.0)), ModelError);
}

TEST_CASE("random LPs match vertex enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(0.5, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int m = 1 + static_cast<int>(rng() % 4);
    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd bvec(m), c(n), u(n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) A(i, j) = coef(rng);
      bvec[i] = coef(rng) + 1.0;
    }
    for (int j = 0; j < n; ++j) {
      c[j] = coef(rng);
      u[j] = pos(rng);
    }
    ProgramBuilder b(Sense::Minimize);
    std::vector<VarRef> xs;
    for (int j = 0; j < n; ++j) xs.push_back(b.add_continuous(0.0, u[j]));
    for (int i = 0; i < m; ++i) {
      LinearExpr e;
      for (int j = 0; j < n; ++j) e.add(xs[static_cast<std::size_t>(j)], A(i, j));
      b.add_row(e, RowSense::LessEqual, bvec[i]);
    }
    LinearExpr obj;
    for (int j = 0; j < n; ++j) obj.add(xs[static_cast<std::size_t>(j)], c[j]);
    b.set_objective(obj);
    const Program p = std::move(b).finish();
    const auto out = solve_with_gap(p, 0.0);
    const double oracle = brute_force_lp(A, bvec, c, u);
    if (std::isinf(oracle)) {
      CHECK(out.status == SolveStatus::Infeasible);
    } else {
      REQUIRE(out.status == SolveStatus::OptimalWithinGap);
      CHECK(out.incumbent_value == doctest::Approx(oracle).epsilon(1e-7));
      CHECK(p.max_violation(out.assignment) <= 1e-6);
    }
  }
}

TEST_CASE("random binary programs match enumeration") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-4.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 5);
    const int m = 1 + static_cast<int>(rng() % 3);
    std::vector<std::vector<double>> A(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n)));
    std::vector<double> bvec(static_cast<std::size_t>(m)), c(static_cast<std::size_t>(n));
    for (auto& row : A)
      for (auto& a : row) a = coef(rng);
    for (auto& v : bvec) v = coef(rng) + 2.0;
    for (auto& v : c) v = coef(rng);
    ProgramBuilder b(Sense::Maximize);
    std::vector<VarRef> xs;
    for (int j = 0; j < n; ++j) xs.push_back(b.add_binary());
    auto cont = b.add_continuous(0.0, 1.0);
    for (int i = 0; i < m; ++i) {
      LinearExpr e;
      for (int j = 0; j < n; ++j) e.add(xs[static_cast<std::size_t>(j)], A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      e.add(cont, 1.0);
      b.add_row(e, RowSense::LessEqual, bvec[static_cast<std::size_t>(i)]);
    }
    LinearExpr obj;
    for (int j = 0; j < n; ++j) obj.add(xs[static_cast<std::size_t>(j)], c[static_cast<std::size_t>(j)]);
    obj.add(cont, 0.5);
    b.set_objective(obj);
    const Program p = std::move(b).finish();

    double oracle = -INFINITY;
    for (int mask = 0; mask < (1 << n); ++mask) {
      double slack = INFINITY;
      for (int i = 0; i < m; ++i) {
        double lhs = 0.0;
        for (int j = 0; j < n; ++j)
          if (mask >> j & 1) lhs += A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        slack = std::min(slack, bvec[static_cast<std::size_t>(i)] - lhs);
      }
      if (slack < 0) continue;
      double v = 0.5 * std::min(1.0, slack);
      for (int j = 0; j < n; ++j)
        if (mask >> j & 1) v += c[static_cast<std::size_t>(j)];
      oracle = std::max(oracle, v);
    }
    const auto out = solve_with_gap(p, 0.0);
    if (std::isinf(oracle)) {
      CHECK(out.status == SolveStatus::Infeasible);
      continue;
    }
    REQUIRE(out.status == SolveStatus::OptimalWithinGap);
    CHECK(out.incumbent_value == doctest::Approx(oracle).epsilon(1e-7));
    CHECK(out.relaxation_value >= out.incumbent_value - 1e-8 * std::max(1.0, std::abs(out.incumbent_value)));
    CHECK(p.max_violation(out.assignment) <= 1e-6);
  }
}

TEST_CASE("debug text round trip") {
  ProgramBuilder b(Sense::Minimize);
  auto x = b.add_binary("x");
  auto y = b.add_continuous(-1.5, 2.25, "y");
  auto z = b.add_free("z");
  b.add_row(LinearExpr{}.add(x, 1.0).add(y, 0.1), RowSense::LessEqual, 3.0, "a");
  b.add_row(LinearExpr{}.add(z, -2.0), RowSense::Equal, 0.3, "b");
  b.add_row(LinearExpr{}.add(y, 1.0 / 3.0), RowSense::GreaterEqual, -1.0);
  b.add_quad_row({{{y, 2.0}}, {{z, 1.0}}, 4.0, "q"});
  b.set_objective(LinearExpr{1.25}.add(x, 7.0).add(z, -1.0));
  b.add_objective_square(y, 0.5);
  const Program p = std::move(b).finish();
  const std::string text = to_debug_text(p);
  std::istringstream in(text);
  const Program q = parse_debug_text(in);
  REQUIRE(q.num_vars() == p.num_vars());
  REQUIRE(q.num_rows() == p.num_rows());
  REQUIRE(q.quad_rows().size() == p.quad_rows().size());
  CHECK(q.sense() == p.sense());
  for (int i = 0; i < p.num_rows(); ++i) {
    const auto& r1 = p.rows()[static_cast<std::size_t>(i)];
    const auto& r2 = q.rows()[static_cast<std::size_t>(i)];
    CHECK(r1.sense == r2.sense);
    CHECK(r1.rhs == r2.rhs);
    double s1 = 0, s2 = 0;
    for (const auto& t : r1.terms) s1 += t.coef;
    for (const auto& t : r2.terms) s2 += t.coef;
    CHECK(s1 == s2);
  }
  for (int j = 0; j < p.num_vars(); ++j) {
    CHECK(p.vars()[static_cast<std::size_t>(j)].kind == q.vars()[static_cast<std::size_t>(j)].kind);
    CHECK(p.vars()[static_cast<std::size_t>(j)].lower == q.vars()[static_cast<std::size_t>(j)].lower);
    CHECK(p.vars()[static_cast<std::size_t>(j)].upper == q.vars()[static_cast<std::size_t>(j)].upper);
  }
  CHECK(q.objective_constant() == p.objective_constant());
  CHECK(to_debug_text(q) == text);
}

TEST_CASE("repeat solves are deterministic") {
  ProgramBuilder b(Sense::Minimize);
  std::vector<VarRef> xs;
  for (int j = 0; j < 6; ++j) xs.push_back(b.add_binary());
  LinearExpr cover;
  LinearExpr obj;
  for (int j = 0; j < 6; ++j) {
    cover.add(xs[static_cast<std::size_t>(j)], 1.0 + j % 3);
    obj.add(xs[static_cast<std::size_t>(j)], 2.0 + 0.37 * j);
  }
  b.add_row(cover, RowSense::GreaterEqual, 4.0);
  b.set_objective(obj);
  const Program p = std::move(b).finish();
  const auto a1 = solve_with_gap(p, 0.0);
  const auto a2 = solve_with_gap(p, 0.0);
  CHECK(std::abs(a1.incumbent_value - a2.incumbent_value) <= 1e-9);
  CHECK(a1.assignment == a2.assignment);
}

TEST_CASE("backend registry") {
  const auto names = available_backends();
  CHECK(std::find(names.begin(), names.end(), "embedded") != names.end());
  CHECK(make_backend("embedded")->name() == "embedded");
  CHECK_THROWS_AS(make_backend("no-such-engine"), ModelError);
}
