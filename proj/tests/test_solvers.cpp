#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mcf/gd.hpp"
#include "mcf/lp_solvers.hpp"
#include "support/fixtures.hpp"

using namespace mcf;

TEST_CASE("lp_mlu_flows on the case study agrees with the refined grid oracle") {
  Topology t = fixtures::case_study_topology();
  PathCatalog cat = fixtures::case_study_catalog(t);
  for (const Scenario& sc : fixtures::case_study_scenarios()) {
    SolveResult lp = lp_mlu_flows(t, cat, sc.demand);
    GridOracleResult oracle =
        grid_oracle(t, cat, single_scenario(sc.demand), Objective::Mlu, 1e-2, 4);
    CHECK(std::abs(lp.objective - oracle.value) < 1e-4);
    // Flows deliver each demand exactly.
    for (std::size_t q = 0; q < cat.pair_count(); ++q) {
      double sum = 0.0;
      for (int j = 0; j < cat.k(); ++j) sum += lp.allocation.values[cat.slot(q, j)];
      CHECK(sum == Catch::Approx(sc.demand(cat.pair(q).first, cat.pair(q).second)).margin(1e-7));
    }
  }
  // Scenario A's optimum is 11/14 (balance the direct link against the
  // shared detour).
  SolveResult a = lp_mlu_flows(t, cat, fixtures::case_study_demand(1.5, 6.0 / 7.0));
  CHECK(a.objective == Catch::Approx(11.0 / 14.0).epsilon(1e-7));
}

TEST_CASE("lp_mlu_flows trivia") {
  Topology t = fixtures::case_study_topology();
  PathCatalog cat = fixtures::case_study_catalog(t);
  SECTION("zero demand") {
    SolveResult r = lp_mlu_flows(t, cat, DemandMatrix(4));
    CHECK(r.objective == 0.0);
    for (double v : r.allocation.values) CHECK(v == 0.0);
  }
  SECTION("single pair single path takes the bottleneck ratio") {
    Topology line(3, {{0, 1}, {1, 2}}, {4.0, 2.0});
    PathCatalog lc = build_catalog(line, 2);
    DemandMatrix d(3);
    d.set(0, 2, 1.0);
    CHECK(lp_mlu_flows(line, lc, d).objective == Catch::Approx(0.5));
  }
}

TEST_CASE("lp_weights_mlu matches lp_mlu_flows") {
  SECTION("case study") {
    Topology t = fixtures::case_study_topology();
    PathCatalog cat = fixtures::case_study_catalog(t);
    for (const Scenario& sc : fixtures::case_study_scenarios()) {
      CHECK(std::abs(lp_weights_mlu(t, cat, sc.demand).objective -
                     lp_mlu_flows(t, cat, sc.demand).objective) < 1e-4);
    }
  }
  SECTION("random instances (same feasible set, different variables)") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      Topology t = fixtures::random_connected_topology(seed, 7, 0.3);
      PathCatalog cat = build_catalog(t, 3);
      DemandMatrix d = fixtures::random_demand(seed, 7);
      CHECK(std::abs(lp_weights_mlu(t, cat, d).objective - lp_mlu_flows(t, cat, d).objective) <
            1e-4);
    }
  }
  SECTION("zero demand returns uniform weights") {
    Topology t = fixtures::case_study_topology();
    PathCatalog cat = fixtures::case_study_catalog(t);
    SolveResult r = lp_weights_mlu(t, cat, DemandMatrix(4));
    for (double v : r.allocation.values) CHECK(v == Catch::Approx(0.5));
  }
}

TEST_CASE("flow LPs on canonical instances") {
  SECTION("slack instance delivers everything") {
    Topology t = fixtures::case_study_topology();
    PathCatalog cat = fixtures::case_study_catalog(t);
    DemandMatrix d = fixtures::case_study_demand(0.2, 0.3);
    CHECK(lp_mtf(t, cat, d).objective == Catch::Approx(0.5));
    CHECK(lp_mcf(t, cat, d).objective == Catch::Approx(1.0));
  }
  SECTION("single shared unit edge, two unit demands") {
    Topology t(4, {{0, 2}, {1, 2}, {2, 3}}, {5.0, 5.0, 1.0});
    PathCatalog cat = build_catalog(t, 1);
    DemandMatrix d(4);
    d.set(0, 3, 1.0);
    d.set(1, 3, 1.0);
    CHECK(lp_mtf(t, cat, d).objective == Catch::Approx(1.0));
    CHECK(lp_mcf(t, cat, d).objective == Catch::Approx(0.5));
    // Feasibility of the reported allocations.
    for (const SolveResult& r : {lp_mtf(t, cat, d), lp_mcf(t, cat, d)}) {
      auto load = edge_loads_from_flows(r.allocation.values, cat, t);
      for (int e = 0; e < t.edge_count(); ++e)
        CHECK(load[static_cast<std::size_t>(e)] <= t.capacity(e) + 1e-7);
    }
  }
  SECTION("case-study expected objectives match the oracle surfaces") {
    Topology t = fixtures::case_study_topology();
    PathCatalog cat = fixtures::case_study_catalog(t);
    auto scenarios = fixtures::case_study_scenarios();
    double lp_mtf_avg = 0.0, lp_mcf_avg = 0.0;
    for (const Scenario& sc : scenarios) {
      lp_mtf_avg += sc.prob * lp_mtf(t, cat, sc.demand).objective;
      lp_mcf_avg += sc.prob * lp_mcf(t, cat, sc.demand).objective;
    }
    GridOracleResult og_mtf = grid_oracle(t, cat, scenarios, Objective::Mtf, 1e-3);
    GridOracleResult og_mcf = grid_oracle(t, cat, scenarios, Objective::Mcf, 1e-3);
    CHECK(std::abs(lp_mtf_avg - og_mtf.value) < 1e-3);
    CHECK(std::abs(lp_mcf_avg - og_mcf.value) < 1e-3);
    // Both demand patterns are fully deliverable, so the optima are the
    // expected total demand and 1.
    CHECK(og_mtf.value == Catch::Approx(211.0 / 84.0).epsilon(1e-6));
    CHECK(og_mcf.value == Catch::Approx(1.0));
  }
}

TEST_CASE("grid oracle behavior") {
  Topology t = fixtures::case_study_topology();
  PathCatalog cat = fixtures::case_study_catalog(t);
  SECTION("step 1 evaluates only the corners") {
    DemandMatrix d = fixtures::case_study_demand(1.0, 0.0);
    GridOracleResult r = grid_oracle(t, cat, single_scenario(d), Objective::Mlu, 1.0);
    // Corners of the (0,3) pair simplex: all-direct or all-detour, both MLU 1.
    CHECK(r.value == Catch::Approx(1.0));
  }
  SECTION("expected MLU surface is convex along grid lines") {
    auto scenarios = fixtures::case_study_scenarios();
    auto value_at = [&](double w0, double w1) {
      std::vector<double> w{w0, 1 - w0, w1, 1 - w1};
      double acc = 0.0;
      for (const Scenario& sc : scenarios)
        acc += sc.prob * eval_mlu_unnormalized(w, sc.demand, cat, t);
      return acc;
    };
    for (double fixed : {0.0, 0.3, 0.7, 1.0}) {
      for (double x = 0.0; x <= 1.0 - 2 * 0.05; x += 0.05) {
        // Discrete chord check along both axes.
        CHECK(value_at(x + 0.05, fixed) <=
              0.5 * value_at(x, fixed) + 0.5 * value_at(x + 0.1, fixed) + 1e-9);
        CHECK(value_at(fixed, x + 0.05) <=
              0.5 * value_at(fixed, x) + 0.5 * value_at(fixed, x + 0.1) + 1e-9);
      }
    }
  }
  SECTION("oracle optimum is sandwiched by the LP and the Lipschitz bound") {
    for (const Scenario& sc : fixtures::case_study_scenarios()) {
      double step = 1e-2;
      GridOracleResult coarse = grid_oracle(t, cat, single_scenario(sc.demand), Objective::Mlu, step);
      double lp = lp_mlu_flows(t, cat, sc.demand).objective;
      double rho = sc.demand.max_entry() / t.min_capacity();
      CHECK(coarse.value >= lp - 1e-9);
      // Free dims move by at most step/2 each to reach the optimum (l1 form).
      CHECK(coarse.value - lp <= rho * 2.0 * 2.0 * (step / 2) + 1e-9);
    }
  }
  SECTION("dimension guard") {
    Topology big = fixtures::random_connected_topology(3, 8, 0.4);
    PathCatalog bc = build_catalog(big, 4);
    DemandMatrix d = fixtures::random_demand(3, 8);
    CHECK_THROWS_AS(grid_oracle(big, bc, single_scenario(d), Objective::Mlu, 0.5),
                    ValidationError);
  }
}

TEST_CASE("lp_top spans shortest-path-only to full LP") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 8, 0.3);
    PathCatalog cat = build_catalog(t, 3);
    DemandMatrix d = fixtures::random_demand(seed, 8);
    double full = lp_mlu_flows(t, cat, d).objective;
    LpTopResult all = lp_top(t, cat, d, Objective::Mlu, 1.0);
    CHECK(all.objective == Catch::Approx(full).margin(1e-6));
    LpTopResult none = lp_top(t, cat, d, Objective::Mlu, 0.0);
    Allocation first_path;
    first_path.mode = Allocation::Mode::Weights;
    first_path.values.assign(cat.slot_count(), 0.0);
    for (std::size_t q = 0; q < cat.pair_count(); ++q) first_path.values[cat.slot(q, 0)] = 1.0;
    CHECK(none.objective == Catch::Approx(eval_mlu(first_path, d, cat, t)));
    LpTopResult frac = lp_top(t, cat, d, Objective::Mlu, 0.1);
    CHECK(frac.objective >= full - 1e-7);        // heuristic never beats exact
    CHECK(frac.objective <= none.objective + 1e-7);  // and never loses to pure SP
  }
}

TEST_CASE("pop decomposition") {
  SECTION("one replica is exactly the LP") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      Topology t = fixtures::random_connected_topology(seed, 7, 0.3);
      PathCatalog cat = build_catalog(t, 3);
      DemandMatrix d = fixtures::random_demand(seed, 7);
      PopResult pop = pop_solve(t, cat, d, 1, Objective::Mtf, seed);
      CHECK(pop.objective == Catch::Approx(lp_mtf(t, cat, d).objective).margin(1e-7));
      PopResult pop_mlu = pop_solve(t, cat, d, 1, Objective::Mlu, seed);
      CHECK(pop_mlu.objective == Catch::Approx(lp_mlu_flows(t, cat, d).objective).margin(1e-7));
    }
  }
  SECTION("k=2 merged MTF stays feasible and below the LP") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Topology t = fixtures::random_connected_topology(seed, 10, 0.25);
      PathCatalog cat = build_catalog(t, 3);
      DemandMatrix d = fixtures::random_demand(seed, 10);
      PopResult pop = pop_solve(t, cat, d, 2, Objective::Mtf, seed);
      auto load = edge_loads_from_flows(pop.allocation.values, cat, t);
      for (int e = 0; e < t.edge_count(); ++e)
        CHECK(load[static_cast<std::size_t>(e)] <= t.capacity(e) + 1e-6);
      double gap = lp_mtf(t, cat, d).objective - pop.objective;
      CHECK(gap >= -1e-7);
    }
  }
}

TEST_CASE("lp_mlu_flows lower-bounds every weight allocation") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 7, 0.3);
    PathCatalog cat = build_catalog(t, 3);
    DemandMatrix d = fixtures::random_demand(seed, 7);
    double opt = lp_mlu_flows(t, cat, d).objective;
    for (int trial = 0; trial < 1000; ++trial) {
      Allocation w = fixtures::random_weights(mix_seed(seed, trial), cat);
      CHECK(eval_mlu(w, d, cat, t) >= opt - 1e-7);
    }
  }
}
