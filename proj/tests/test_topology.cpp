#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "mcf/topology.hpp"
#include "support/fixtures.hpp"

using namespace mcf;

TEST_CASE("edge-list parsing accepts the case-study file") {
  std::istringstream in(
      "nodes 4\n"
      "# unit capacities\n"
      "0 3 1\n"
      "0 2 1\n"
      "2 3 1\n"
      "1 3 1\n"
      "1 2 1\n");
  Topology t = parse_topology(in);
  CHECK(t.node_count() == 4);
  CHECK(t.edge_count() == 5);
  CHECK(t.capacity(0) == 1.0);
  CHECK(t.edge_id(0, 3) == 0);
  CHECK(t.edge_id(3, 0) == -1);
}

TEST_CASE("edge-list parsing rejects bad input") {
  SECTION("no edges") {
    std::istringstream in("nodes 3\n");
    CHECK_THROWS_WITH(parse_topology(in), Catch::Matchers::ContainsSubstring("no edges"));
  }
  SECTION("self-loop") {
    std::istringstream in("nodes 2\n0 0 1.0\n");
    CHECK_THROWS_AS(parse_topology(in), ValidationError);
  }
  SECTION("duplicate edge") {
    std::istringstream in("nodes 2\n0 1 1.0\n0 1 2.0\n");
    CHECK_THROWS_AS(parse_topology(in), ValidationError);
  }
  SECTION("unknown node id") {
    std::istringstream in("nodes 2\n0 5 1.0\n");
    CHECK_THROWS_AS(parse_topology(in), ValidationError);
  }
  SECTION("nonpositive capacity") {
    std::istringstream in("nodes 2\n0 1 0\n");
    CHECK_THROWS_AS(parse_topology(in), ValidationError);
  }
  SECTION("parse error carries line number") {
    std::istringstream in("nodes 2\n0 1 bogus extra\n");
    CHECK_THROWS_WITH(parse_topology(in, "f"), Catch::Matchers::ContainsSubstring("f:2"));
  }
}

TEST_CASE("topology round-trips through the text format") {
  Topology t = fixtures::random_connected_topology(7, 9, 0.3, 0.1234567890123,
                                                   1893.000000217);
  std::ostringstream out;
  write_topology(t, out);
  std::istringstream in(out.str());
  Topology back = parse_topology(in);
  REQUIRE(back.node_count() == t.node_count());
  REQUIRE(back.edge_count() == t.edge_count());
  for (int e = 0; e < t.edge_count(); ++e) {
    CHECK(back.edge(e).src == t.edge(e).src);
    CHECK(back.edge(e).dst == t.edge(e).dst);
    CHECK(back.capacity(e) == t.capacity(e));  // bit-exact
  }
}

TEST_CASE("largest_scc keeps a strongly connected graph intact") {
  Topology t = fixtures::random_connected_topology(3, 8);
  SccResult r = largest_scc(t);
  CHECK(r.graph.node_count() == t.node_count());
  CHECK(r.graph.edge_count() == t.edge_count());
  for (int v = 0; v < t.node_count(); ++v) CHECK(r.old_to_new[static_cast<std::size_t>(v)] == v);
}

TEST_CASE("largest_scc picks the bigger cycle and breaks ties by smallest id") {
  SECTION("two disjoint cycles of different size") {
    // 4-cycle on {0,1,2,3}, 3-cycle on {4,5,6}.
    Topology t(7, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 4}},
               std::vector<double>(7, 1.0));
    SccResult r = largest_scc(t);
    CHECK(r.new_to_old == std::vector<int>{0, 1, 2, 3});
  }
  SECTION("equal sizes: smallest contained id wins") {
    Topology t(6, {{1, 2}, {2, 1}, {4, 5}, {5, 4}, {0, 1}}, std::vector<double>(5, 1.0));
    SccResult r = largest_scc(t);
    CHECK(r.new_to_old == std::vector<int>{1, 2});
  }
  SECTION("directed chain collapses to the lowest singleton") {
    Topology t(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
    SccResult r = largest_scc(t);
    CHECK(r.new_to_old == std::vector<int>{0});
    CHECK(r.graph.node_count() == 1);
    CHECK(r.graph.edge_count() == 0);
  }
}

TEST_CASE("largest_scc matches the brute-force oracle on random graphs") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    // Sparse random digraphs up to 8 nodes, not necessarily connected.
    std::mt19937_64 rng(splitmix64(seed));
    int n = 3 + static_cast<int>(rng() % 6);
    std::vector<Edge> edges;
    std::vector<double> caps;
    std::set<std::pair<int, int>> used;
    int m = static_cast<int>(rng() % static_cast<std::uint64_t>(2 * n + 1));
    for (int i = 0; i < m; ++i) {
      int u = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      int v = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      if (u == v || used.count({u, v})) continue;
      used.insert({u, v});
      edges.push_back({u, v});
      caps.push_back(1.0);
    }
    Topology t(n, edges, caps);
    SccResult r = largest_scc(t);
    CHECK(r.new_to_old == fixtures::scc_oracle(t));
  }
}

TEST_CASE("largest_scc is idempotent") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Topology t = fixtures::random_connected_topology(seed, 7, 0.15);
    SccResult once = largest_scc(t);
    SccResult twice = largest_scc(once.graph);
    CHECK(twice.graph.node_count() == once.graph.node_count());
    CHECK(twice.graph.edges() == once.graph.edges());
  }
}

TEST_CASE("zero_capacities removes exactly the failed edges") {
  Topology t = fixtures::case_study_topology();
  SECTION("empty failure set is the identity") {
    Topology r = zero_capacities(t, {});
    CHECK(r.edges() == t.edges());
    CHECK(r.capacities() == t.capacities());
  }
  SECTION("single failure") {
    Topology r = zero_capacities(t, {0});  // edge (0,3)
    CHECK(r.edge_count() == 4);
    CHECK(r.edge_id(0, 3) == -1);
    CHECK(r.edge_id(0, 2) >= 0);
  }
  SECTION("failing everything leaves an edgeless graph") {
    Topology r = zero_capacities(t, {0, 1, 2, 3, 4});
    CHECK(r.edge_count() == 0);
    CHECK(r.node_count() == 4);
  }
  SECTION("unknown edge id") {
    CHECK_THROWS_AS(zero_capacities(t, {99}), ValidationError);
  }
}

TEST_CASE("sequential failure application composes") {
  Topology t = fixtures::random_connected_topology(11, 8, 0.4);
  std::set<int> a{0, 3, 5};
  std::set<int> b{1, 6};
  std::set<int> both;
  both.insert(a.begin(), a.end());
  both.insert(b.begin(), b.end());
  Topology joint = zero_capacities(t, both);
  Topology first = zero_capacities(t, a);
  // Edge ids shift after removal, so B is re-identified by endpoints.
  std::set<int> b_remapped;
  for (int e : b) b_remapped.insert(first.edge_id(t.edge(e).src, t.edge(e).dst));
  Topology second = zero_capacities(first, b_remapped);
  CHECK(second.edges() == joint.edges());
  CHECK(second.capacities() == joint.capacities());
}
