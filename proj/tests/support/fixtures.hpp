#pragma once

// Shared instance builders and independent oracles for the test suites.  The
// oracles here (brute-force SCC, exhaustive path enumeration, quadrature)
// deliberately avoid the library's algorithmic code paths.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "mcf/demand.hpp"
#include "mcf/lp_solvers.hpp"
#include "mcf/objectives.hpp"
#include "mcf/path_catalog.hpp"
#include "mcf/topology.hpp"

namespace fixtures {

// The 4-node, 5-link, unit-capacity instance (0-based node ids: the paper's
// nodes 1..4 become 0..3).  Edges: (0,3), (0,2), (2,3), (1,3), (1,2).
inline mcf::Topology case_study_topology() {
  return mcf::Topology(4, {{0, 3}, {0, 2}, {2, 3}, {1, 3}, {1, 2}},
                       {1.0, 1.0, 1.0, 1.0, 1.0});
}

// Candidate paths for the two demand pairs only, k = 2.
inline mcf::PathCatalog case_study_catalog(const mcf::Topology& t) {
  std::vector<std::pair<int, int>> pairs{{0, 3}, {1, 3}};
  std::vector<mcf::Path> paths{{0, 3}, {0, 2, 3}, {1, 3}, {1, 2, 3}};
  return mcf::PathCatalog(t, 2, std::move(pairs), std::move(paths), {2, 2});
}

inline mcf::DemandMatrix case_study_demand(double d03, double d13) {
  mcf::DemandMatrix d(4);
  d.set(0, 3, d03);
  d.set(1, 3, d13);
  return d;
}

// Demands are (3/2, 6/7) or (7/6, 3/2) with equal probability.
inline std::vector<mcf::Scenario> case_study_scenarios() {
  std::vector<mcf::Scenario> s;
  s.push_back({case_study_demand(1.5, 6.0 / 7.0), 0.5});
  s.push_back({case_study_demand(7.0 / 6.0, 1.5), 0.5});
  return s;
}

// Random strongly connected digraph: a random Hamiltonian cycle plus extra
// edges, capacities uniform in [cap_lo, cap_hi].
inline mcf::Topology random_connected_topology(std::uint64_t seed, int n,
                                               double extra_edge_prob = 0.25,
                                               double cap_lo = 0.5, double cap_hi = 2.0) {
  std::mt19937_64 rng(mcf::splitmix64(seed ^ 0x746f706fULL));
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::set<std::pair<int, int>> used;
  std::vector<mcf::Edge> edges;
  std::vector<double> caps;
  std::uniform_real_distribution<double> cap(cap_lo, cap_hi);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    int u = perm[static_cast<std::size_t>(i)];
    int v = perm[static_cast<std::size_t>((i + 1) % n)];
    used.insert({u, v});
    edges.push_back({u, v});
    caps.push_back(cap(rng));
  }
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      if (u == v || used.count({u, v})) continue;
      if (coin(rng) < extra_edge_prob) {
        used.insert({u, v});
        edges.push_back({u, v});
        caps.push_back(cap(rng));
      }
    }
  return mcf::Topology(n, std::move(edges), std::move(caps));
}

inline mcf::DemandMatrix random_demand(std::uint64_t seed, int n, double lo = 0.1,
                                       double hi = 1.0, double density = 0.7) {
  std::mt19937_64 rng(mcf::splitmix64(seed ^ 0x64656d64ULL));
  std::uniform_real_distribution<double> value(lo, hi);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  mcf::DemandMatrix d(n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t)
      if (s != t && coin(rng) < density) d.set(s, t, value(rng));
  return d;
}

// Uniform-ish random point on each pair's weight simplex.
inline mcf::Allocation random_weights(std::uint64_t seed, const mcf::PathCatalog& cat) {
  std::mt19937_64 rng(mcf::splitmix64(seed ^ 0x77656968ULL));
  std::exponential_distribution<double> expo(1.0);
  mcf::Allocation a;
  a.mode = mcf::Allocation::Mode::Weights;
  a.values.assign(cat.slot_count(), 0.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double sum = 0.0;
    for (int j = 0; j < cat.k(); ++j) {
      double v = expo(rng);
      a.values[cat.slot(q, j)] = v;
      sum += v;
    }
    for (int j = 0; j < cat.k(); ++j) a.values[cat.slot(q, j)] /= sum;
  }
  return a;
}

inline mcf::Allocation random_flows(std::uint64_t seed, const mcf::PathCatalog& cat,
                                    double hi = 1.0) {
  std::mt19937_64 rng(mcf::splitmix64(seed ^ 0x666c6f77ULL));
  std::uniform_real_distribution<double> value(0.0, hi);
  mcf::Allocation a;
  a.mode = mcf::Allocation::Mode::PlannedFlows;
  a.values.resize(cat.slot_count());
  for (double& v : a.values) v = value(rng);
  return a;
}

// ---------------------------------------------------------------------------
// Brute-force oracles.
// ---------------------------------------------------------------------------

// Largest SCC as a node set via transitive closure; ties by smallest node id.
inline std::vector<int> scc_oracle(const mcf::Topology& t) {
  const int n = t.node_count();
  std::vector<std::vector<char>> reach(static_cast<std::size_t>(n),
                                       std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int u = 0; u < n; ++u) reach[static_cast<std::size_t>(u)][static_cast<std::size_t>(u)] = 1;
  for (const mcf::Edge& e : t.edges())
    reach[static_cast<std::size_t>(e.src)][static_cast<std::size_t>(e.dst)] = 1;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] &&
            reach[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)])
          reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
  std::vector<char> assigned(static_cast<std::size_t>(n), 0);
  std::vector<int> best;
  for (int u = 0; u < n; ++u) {
    if (assigned[static_cast<std::size_t>(u)]) continue;
    std::vector<int> comp;
    for (int v = 0; v < n; ++v)
      if (reach[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] &&
          reach[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)]) {
        comp.push_back(v);
        assigned[static_cast<std::size_t>(v)] = 1;
      }
    if (comp.size() > best.size() || (comp.size() == best.size() && (best.empty() || comp.front() < best.front())))
      best = comp;
  }
  return best;
}

// Every simple path from s to d, sorted by (hop count, lexicographic order).
inline std::vector<mcf::Path> all_simple_paths(const mcf::Topology& t, int s, int d) {
  std::vector<mcf::Path> out;
  std::vector<char> visited(static_cast<std::size_t>(t.node_count()), 0);
  mcf::Path current{s};
  visited[static_cast<std::size_t>(s)] = 1;
  std::function<void(int)> dfs = [&](int u) {
    if (u == d) {
      out.push_back(current);
      return;
    }
    for (int e : t.out_edges(u)) {
      int v = t.edge(e).dst;
      if (visited[static_cast<std::size_t>(v)]) continue;
      visited[static_cast<std::size_t>(v)] = 1;
      current.push_back(v);
      dfs(v);
      current.pop_back();
      visited[static_cast<std::size_t>(v)] = 0;
    }
  };
  dfs(s);
  std::sort(out.begin(), out.end(), [](const mcf::Path& a, const mcf::Path& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

}  // namespace fixtures
