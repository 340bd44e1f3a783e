#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mcf/objectives.hpp"
#include "support/fixtures.hpp"

using namespace mcf;

namespace {

Allocation direct_path_weights(const PathCatalog& cat) {
  Allocation a;
  a.mode = Allocation::Mode::Weights;
  a.values.assign(cat.slot_count(), 0.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) a.values[cat.slot(q, 0)] = 1.0;
  return a;
}

}  // namespace

TEST_CASE("eval_mlu on the case study with all mass on direct links") {
  Topology t = fixtures::case_study_topology();
  PathCatalog cat = fixtures::case_study_catalog(t);
  DemandMatrix d = fixtures::case_study_demand(1.5, 6.0 / 7.0);
  Allocation a = direct_path_weights(cat);
  CHECK(eval_mlu(a, d, cat, t) == Catch::Approx(1.5));  // edge (0,3) carries 1.5/1
}

TEST_CASE("eval_mlu basics") {
  Topology t = fixtures::case_study_topology();
  PathCatalog cat = fixtures::case_study_catalog(t);
  SECTION("zero demand gives zero") {
    CHECK(eval_mlu(Allocation::uniform_weights(cat), DemandMatrix(4), cat, t) == 0.0);
  }
  SECTION("single pair over a roomy edge") {
    Topology t2(2, {{0, 1}}, {2.0});
    PathCatalog cat2 = build_catalog(t2, 1);
    DemandMatrix d(2);
    d.set(0, 1, 1.0);
    CHECK(eval_mlu(Allocation::uniform_weights(cat2), d, cat2, t2) == Catch::Approx(0.5));
  }
  SECTION("weights renormalize per pair") {
    DemandMatrix d = fixtures::case_study_demand(1.0, 0.0);
    Allocation a;
    a.mode = Allocation::Mode::Weights;
    a.values = {2.0, 0.0, 0.0, 0.0};  // pair (0,3): (2,0) acts as (1,0)
    Allocation b;
    b.mode = Allocation::Mode::Weights;
    b.values = {1.0, 0.0, 0.0, 0.0};
    CHECK(eval_mlu(a, d, cat, t) == Catch::Approx(eval_mlu(b, d, cat, t)));
  }
  SECTION("zero weight mass with nonzero demand is an error") {
    DemandMatrix d = fixtures::case_study_demand(1.0, 0.0);
    Allocation a;
    a.mode = Allocation::Mode::Weights;
    a.values = {0.0, 0.0, 0.5, 0.5};
    CHECK_THROWS_AS(eval_mlu(a, d, cat, t), ValidationError);
  }
}

TEST_CASE("duplicate-padding slots carry no physical meaning") {
  Topology t = fixtures::case_study_topology();
  PathCatalog k2 = fixtures::case_study_catalog(t);
  PathCatalog k4 = [&] {
    std::vector<std::pair<int, int>> pairs{{0, 3}, {1, 3}};
    std::vector<Path> paths{{0, 3}, {0, 2, 3}, {0, 2, 3}, {0, 2, 3},
                            {1, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
    return PathCatalog(t, 4, std::move(pairs), std::move(paths), {2, 2});
  }();
  DemandMatrix d = fixtures::case_study_demand(1.5, 6.0 / 7.0);
  // Splitting the second path's weight across duplicates changes nothing.
  Allocation w2;
  w2.mode = Allocation::Mode::Weights;
  w2.values = {0.6, 0.4, 0.7, 0.3};
  Allocation w4;
  w4.mode = Allocation::Mode::Weights;
  w4.values = {0.6, 0.1, 0.1, 0.2, 0.7, 0.05, 0.15, 0.1};
  CHECK(eval_mlu(w4, d, k4, t) == Catch::Approx(eval_mlu(w2, d, k2, t)));
}

TEST_CASE("eval_mtf_mcf scaling construction") {
  SECTION("flows within capacity are untouched") {
    Topology t = fixtures::case_study_topology();
    PathCatalog cat = fixtures::case_study_catalog(t);
    DemandMatrix d = fixtures::case_study_demand(1.0, 1.0);
    Allocation a;
    a.mode = Allocation::Mode::PlannedFlows;
    a.values = {0.5, 0.2, 0.5, 0.2};
    FlowMetrics m = eval_mtf_mcf(a, d, cat, t);
    CHECK(m.gamma == 1.0);
    CHECK(m.scaled_flows == a.values);
    CHECK(m.mtf == Catch::Approx(1.4));
    CHECK(m.mcf == Catch::Approx(0.7));
  }
  SECTION("two paths over one unit edge scale down by 2") {
    // Both pairs' only paths share edge (2,3).
    Topology t(4, {{0, 2}, {1, 2}, {2, 3}}, {10.0, 10.0, 1.0});
    PathCatalog cat = build_catalog(t, 1);
    std::size_t q0 = cat.pair_index(0, 3), q1 = cat.pair_index(1, 3);
    REQUIRE(q0 != PathCatalog::npos);
    REQUIRE(q1 != PathCatalog::npos);
    DemandMatrix d(4);
    d.set(0, 3, 5.0);
    d.set(1, 3, 5.0);
    Allocation a = Allocation::zero_flows(cat);
    a.values[cat.slot(q0, 0)] = 1.0;
    a.values[cat.slot(q1, 0)] = 1.0;
    FlowMetrics m = eval_mtf_mcf(a, d, cat, t);
    CHECK(m.gamma == Catch::Approx(2.0));
    CHECK(m.scaled_flows[cat.slot(q0, 0)] == Catch::Approx(0.5));
    CHECK(m.scaled_flows[cat.slot(q1, 0)] == Catch::Approx(0.5));
  }
  SECTION("delivered flow is capped by demand") {
    Topology t(2, {{0, 1}}, {100.0});
    PathCatalog cat = build_catalog(t, 1);
    DemandMatrix d(2);
    d.set(0, 1, 1.0);
    Allocation a;
    a.mode = Allocation::Mode::PlannedFlows;
    a.values = {50.0};
    FlowMetrics m = eval_mtf_mcf(a, d, cat, t);
    CHECK(m.mtf == Catch::Approx(1.0));
    CHECK(m.mcf == Catch::Approx(1.0));
  }
  SECTION("no positive demand means mcf = 1") {
    Topology t(2, {{0, 1}}, {1.0});
    PathCatalog cat = build_catalog(t, 1);
    Allocation a = Allocation::zero_flows(cat);
    CHECK(eval_mtf_mcf(a, DemandMatrix(2), cat, t).mcf == 1.0);
  }
}

TEST_CASE("average satisfaction") {
  Topology t = fixtures::case_study_topology();
  PathCatalog cat = fixtures::case_study_catalog(t);
  DemandMatrix d = fixtures::case_study_demand(1.0, 1.0);
  SECTION("full delivery gives 1") {
    Allocation a;
    a.mode = Allocation::Mode::PlannedFlows;
    a.values = {1.0, 0.0, 1.0, 0.0};
    CHECK(eval_avg_satisfaction(a, d, cat, t) == Catch::Approx(1.0));
  }
  SECTION("half delivery gives one half") {
    Allocation a;
    a.mode = Allocation::Mode::PlannedFlows;
    a.values = {0.5, 0.0, 0.5, 0.0};
    CHECK(eval_avg_satisfaction(a, d, cat, t) == Catch::Approx(0.5));
  }
  SECTION("matches recomputation from the scaled flows") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Topology rt = fixtures::random_connected_topology(seed, 6, 0.3);
      PathCatalog rc = build_catalog(rt, 3);
      DemandMatrix rd = fixtures::random_demand(seed, 6);
      Allocation a = fixtures::random_flows(seed, rc);
      FlowMetrics m = eval_mtf_mcf(a, rd, rc, rt);
      double expect = 0.0;
      int cnt = 0;
      for (std::size_t q = 0; q < rc.pair_count(); ++q) {
        double dem = rd(rc.pair(q).first, rc.pair(q).second);
        if (dem > 0.0) {
          expect += m.delivered[q] / dem;
          ++cnt;
        }
      }
      expect /= cnt;
      CHECK(eval_avg_satisfaction(a, rd, rc, rt) == Catch::Approx(expect));
    }
  }
}

TEST_CASE("mlu subgradient") {
  Topology t = fixtures::case_study_topology();
  PathCatalog cat = fixtures::case_study_catalog(t);
  SECTION("zero demand gives the zero vector") {
    Allocation a = Allocation::uniform_weights(cat);
    auto g = subgradient_mlu(a, DemandMatrix(4), cat, t);
    for (double v : g) CHECK(v == 0.0);
  }
  SECTION("unique maximizing edge: finite differences of the linear form") {
    DemandMatrix d = fixtures::case_study_demand(1.5, 6.0 / 7.0);
    Allocation a = direct_path_weights(cat);  // max edge (0,3), load 1.5, unique
    auto g = subgradient_mlu(a, d, cat, t);
    const double h = 1e-6;
    for (std::size_t i = 0; i < cat.slot_count(); ++i) {
      std::vector<double> up(a.values), dn(a.values);
      up[i] += h;
      dn[i] -= h;
      double fd = (eval_mlu_unnormalized(up, d, cat, t) - eval_mlu_unnormalized(dn, d, cat, t)) /
                  (2.0 * h);
      if (std::abs(fd) > 1e-12)
        CHECK(std::abs(g[i] - fd) / std::abs(fd) < 1e-4);
      else
        CHECK(std::abs(g[i]) < 1e-9);
    }
    // Closed form: D / c_e* on slots crossing the max edge.
    CHECK(g[cat.slot(0, 0)] == Catch::Approx(1.5));
    CHECK(g[cat.slot(0, 1)] == 0.0);
  }
  SECTION("ties still satisfy the subgradient inequality") {
    DemandMatrix d = fixtures::case_study_demand(1.0, 1.0);
    Allocation a;
    a.mode = Allocation::Mode::Weights;
    a.values = {0.5, 0.5, 0.5, 0.5};  // several edges tie
    auto g = subgradient_mlu(a, d, cat, t);
    double fa = eval_mlu_unnormalized(a.values, d, cat, t);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Allocation b = fixtures::random_weights(seed, cat);
      double fb = eval_mlu_unnormalized(b.values, d, cat, t);
      double lin = fa;
      for (std::size_t i = 0; i < g.size(); ++i) lin += g[i] * (b.values[i] - a.values[i]);
      CHECK(fb >= lin - 1e-9);
    }
  }
}

TEST_CASE("mlu is convex in the split weights") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 7, 0.3);
    PathCatalog cat = build_catalog(t, 3);
    DemandMatrix d = fixtures::random_demand(seed, 7);
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> lambda(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Allocation x = fixtures::random_weights(mix_seed(seed, trial, 1), cat);
      Allocation y = fixtures::random_weights(mix_seed(seed, trial, 2), cat);
      double lam = lambda(rng);
      std::vector<double> mix(cat.slot_count());
      for (std::size_t i = 0; i < mix.size(); ++i)
        mix[i] = lam * x.values[i] + (1 - lam) * y.values[i];
      double fmix = eval_mlu_unnormalized(mix, d, cat, t);
      double bound = lam * eval_mlu_unnormalized(x.values, d, cat, t) +
                     (1 - lam) * eval_mlu_unnormalized(y.values, d, cat, t);
      CHECK(fmix <= bound + 1e-9);
    }
  }
}

TEST_CASE("mtf and mcf are quasi-concave in the planned flows") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 7, 0.3);
    PathCatalog cat = build_catalog(t, 3);
    DemandMatrix d = fixtures::random_demand(seed, 7);
    std::mt19937_64 rng(splitmix64(seed ^ 0x71636b63ULL));
    std::uniform_real_distribution<double> lambda(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Allocation x = fixtures::random_flows(mix_seed(seed, trial, 3), cat);
      Allocation y = fixtures::random_flows(mix_seed(seed, trial, 4), cat);
      double lam = lambda(rng);
      Allocation mix;
      mix.mode = Allocation::Mode::PlannedFlows;
      mix.values.resize(cat.slot_count());
      for (std::size_t i = 0; i < mix.values.size(); ++i)
        mix.values[i] = lam * x.values[i] + (1 - lam) * y.values[i];
      FlowMetrics mx = eval_mtf_mcf(x, d, cat, t);
      FlowMetrics my = eval_mtf_mcf(y, d, cat, t);
      FlowMetrics mm = eval_mtf_mcf(mix, d, cat, t);
      CHECK(mm.mtf >= std::min(mx.mtf, my.mtf) - 1e-9);
      CHECK(mm.mcf >= std::min(mx.mcf, my.mcf) - 1e-9);
    }
  }
}

TEST_CASE("mlu satisfies the l1 Lipschitz bound D_max / c_min") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 6, 0.3);
    PathCatalog cat = build_catalog(t, 3);
    DemandMatrix d = fixtures::random_demand(seed, 6);
    double rho = d.max_entry() / t.min_capacity();
    for (int trial = 0; trial < 100; ++trial) {
      Allocation x = fixtures::random_weights(mix_seed(seed, trial, 5), cat);
      Allocation y = fixtures::random_weights(mix_seed(seed, trial, 6), cat);
      double l1 = 0.0;
      for (std::size_t i = 0; i < x.values.size(); ++i)
        l1 += std::abs(x.values[i] - y.values[i]);
      double gap = std::abs(eval_mlu_unnormalized(x.values, d, cat, t) -
                            eval_mlu_unnormalized(y.values, d, cat, t));
      CHECK(gap <= rho * l1 + 1e-12);
    }
  }
}

TEST_CASE("scaled flows never violate capacity") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 6, 0.3);
    PathCatalog cat = build_catalog(t, 3);
    DemandMatrix d = fixtures::random_demand(seed, 6);
    Allocation a = fixtures::random_flows(seed, cat, 3.0);
    FlowMetrics m = eval_mtf_mcf(a, d, cat, t);
    std::vector<double> load = edge_loads_from_flows(m.scaled_flows, cat, t);
    for (int e = 0; e < t.edge_count(); ++e)
      CHECK(load[static_cast<std::size_t>(e)] <= t.capacity(e) + 1e-9);
  }
}

TEST_CASE("extra capacity never hurts") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 6, 0.3);
    PathCatalog cat = build_catalog(t, 3);
    DemandMatrix d = fixtures::random_demand(seed, 6);
    Allocation w = fixtures::random_weights(seed, cat);
    Allocation f = fixtures::random_flows(seed, cat);
    std::mt19937_64 rng(splitmix64(seed));
    int edge = static_cast<int>(rng() % static_cast<std::uint64_t>(t.edge_count()));
    std::vector<double> caps = t.capacities();
    caps[static_cast<std::size_t>(edge)] *= 2.0;
    Topology bigger(t.node_count(), t.edges(), caps);
    PathCatalog cat2(bigger, cat.k(),
                     std::vector<std::pair<int, int>>(cat.pairs()),
                     [&] {
                       std::vector<Path> ps;
                       for (std::size_t s = 0; s < cat.slot_count(); ++s) ps.push_back(cat.path(s));
                       return ps;
                     }(),
                     [&] {
                       std::vector<int> dc;
                       for (std::size_t q = 0; q < cat.pair_count(); ++q)
                         dc.push_back(cat.distinct_paths(q));
                       return dc;
                     }());
    CHECK(eval_mlu(w, d, cat2, bigger) <= eval_mlu(w, d, cat, t) + 1e-12);
    CHECK(eval_mtf_mcf(f, d, cat2, bigger).mtf >= eval_mtf_mcf(f, d, cat, t).mtf - 1e-12);
  }
}
