#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mcf/lp.hpp"

using namespace mcf;

TEST_CASE("simplex solves toy problems") {
  SECTION("max x subject to x <= 3") {
    LpProblem p(true);
    int x = p.add_var("x", 1.0);
    p.add_constraint({{x, 1.0}}, RowSense::Le, 3.0);
    LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.objective == Catch::Approx(3.0));
    CHECK(s.value(x) == Catch::Approx(3.0));
  }
  SECTION("infeasible: x <= -1 with x >= 0") {
    LpProblem p(true);
    int x = p.add_var("x", 1.0);
    p.add_constraint({{x, 1.0}}, RowSense::Le, -1.0);
    CHECK(solve_lp(p).status == LpStatus::Infeasible);
  }
  SECTION("unbounded: max x with no constraints") {
    LpProblem p(true);
    p.add_var("x", 1.0);
    CHECK(solve_lp(p).status == LpStatus::Unbounded);
  }
  SECTION("equalities via two-phase") {
    LpProblem p(false);
    int x = p.add_var("x", 1.0);
    int y = p.add_var("y", 2.0);
    p.add_constraint({{x, 1.0}, {y, 1.0}}, RowSense::Eq, 4.0);
    p.add_constraint({{x, 1.0}}, RowSense::Le, 1.0);
    LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.value(x) == Catch::Approx(1.0));
    CHECK(s.value(y) == Catch::Approx(3.0));
    CHECK(s.objective == Catch::Approx(7.0));
  }
  SECTION("negative rhs ge-row") {
    LpProblem p(false);
    int x = p.add_var("x", 1.0);
    p.add_constraint({{x, -1.0}}, RowSense::Ge, -5.0);  // x <= 5
    p.add_constraint({{x, 1.0}}, RowSense::Ge, 2.0);
    LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.value(x) == Catch::Approx(2.0));
  }
}

TEST_CASE("degenerate problems terminate under Bland's rule") {
  // Classic Beale-style degeneracy.
  LpProblem p(false);
  int x1 = p.add_var("x1", -0.75);
  int x2 = p.add_var("x2", 150.0);
  int x3 = p.add_var("x3", -0.02);
  int x4 = p.add_var("x4", 6.0);
  p.add_constraint({{x1, 0.25}, {x2, -60.0}, {x3, -0.04}, {x4, 9.0}}, RowSense::Le, 0.0);
  p.add_constraint({{x1, 0.5}, {x2, -90.0}, {x3, -0.02}, {x4, 3.0}}, RowSense::Le, 0.0);
  p.add_constraint({{x3, 1.0}}, RowSense::Le, 1.0);
  LpSolution s = solve_lp(p);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == Catch::Approx(-0.05));
}

TEST_CASE("iteration cap reports the limit status") {
  LpProblem p(false);
  int x = p.add_var("x", 1.0);
  int y = p.add_var("y", 1.0);
  p.add_constraint({{x, 1.0}, {y, 1.0}}, RowSense::Ge, 1.0);
  CHECK(solve_lp(p, 1e-7, 0).status == LpStatus::Optimal);
  // A cap of one pivot cannot finish phase 1 here.
  LpProblem big(false);
  std::vector<int> vars;
  for (int i = 0; i < 20; ++i) vars.push_back(big.add_var("v" + std::to_string(i), 1.0));
  for (int i = 0; i < 19; ++i)
    big.add_constraint({{vars[i], 1.0}, {vars[i + 1], 1.0}}, RowSense::Ge, 1.0);
  CHECK(solve_lp(big, 1e-7, 1).status == LpStatus::IterationLimit);
}

TEST_CASE("weak duality spot check on random feasible problems") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> coeff(0.1, 2.0);
  for (int round = 0; round < 25; ++round) {
    // min c.x over A x >= b with x in [0, 10]^n: any feasible point bounds
    // the optimum from above.
    LpProblem p(false);
    int n = 4;
    std::vector<int> vars;
    std::vector<double> c;
    for (int i = 0; i < n; ++i) {
      c.push_back(coeff(rng));
      vars.push_back(p.add_var("x" + std::to_string(i), c.back()));
    }
    std::vector<double> feasible(static_cast<std::size_t>(n));
    for (double& f : feasible) f = coeff(rng);
    for (int r = 0; r < 3; ++r) {
      std::vector<std::pair<int, double>> terms;
      double lhs_at_feasible = 0.0;
      for (int i = 0; i < n; ++i) {
        double a = coeff(rng);
        terms.push_back({vars[i], a});
        lhs_at_feasible += a * feasible[static_cast<std::size_t>(i)];
      }
      p.add_constraint(std::move(terms), RowSense::Ge, lhs_at_feasible * 0.9);
    }
    for (int i = 0; i < n; ++i) p.add_constraint({{vars[i], 1.0}}, RowSense::Le, 10.0);
    LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::Optimal);
    double feasible_obj = 0.0;
    for (int i = 0; i < n; ++i) feasible_obj += c[static_cast<std::size_t>(i)] * feasible[static_cast<std::size_t>(i)];
    CHECK(s.objective <= feasible_obj + 1e-7);
    // And the optimum itself satisfies every constraint.
    for (const auto& row : p.rows()) {
      double lhs = 0.0;
      for (auto [v, a] : row.terms) lhs += a * s.value(v);
      if (row.sense == RowSense::Ge) CHECK(lhs >= row.rhs - 1e-7);
      if (row.sense == RowSense::Le) CHECK(lhs <= row.rhs + 1e-7);
    }
  }
}

TEST_CASE("plain-text dump lists variables and rows") {
  LpProblem p(true);
  int x = p.add_var("flow_a", 1.0);
  int y = p.add_var("flow_b", 0.0);
  p.add_constraint({{x, 1.0}, {y, 2.0}}, RowSense::Le, 7.0);
  std::string dump = p.dump();
  CHECK(dump.find("maximize") != std::string::npos);
  CHECK(dump.find("flow_a") != std::string::npos);
  CHECK(dump.find("2 flow_b") != std::string::npos);
  CHECK(dump.find("<= 7") != std::string::npos);
  CHECK(dump.find("flow_b >= 0") != std::string::npos);
}
