#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mcf/common.hpp"
#include "mcf/topology.hpp"

namespace mcf {

using Path = std::vector<int>;  // node sequence, first = source, last = destination

namespace detail {

// Hop distances to `target` over the reverse graph, honouring removed nodes
// and edges.  -1 where unreachable.
inline std::vector<int> dist_to_target(const Topology& t, int target,
                                       const std::vector<char>& node_removed,
                                       const std::vector<char>& edge_removed) {
  std::vector<int> dist(static_cast<std::size_t>(t.node_count()), -1);
  if (node_removed[static_cast<std::size_t>(target)]) return dist;
  std::queue<int> q;
  dist[static_cast<std::size_t>(target)] = 0;
  q.push(target);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int e : t.in_edges(u)) {
      if (edge_removed[static_cast<std::size_t>(e)]) continue;
      int v = t.edge(e).src;
      if (node_removed[static_cast<std::size_t>(v)]) continue;
      if (dist[static_cast<std::size_t>(v)] == -1) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

// Minimum-hop path from s to d that is lexicographically smallest as a node
// sequence.  Greedy walk along decreasing distance-to-target, always taking
// the smallest admissible neighbour id.
inline std::optional<Path> lex_shortest_path(const Topology& t, int s, int d,
                                             const std::vector<char>& node_removed,
                                             const std::vector<char>& edge_removed) {
  if (node_removed[static_cast<std::size_t>(s)] || node_removed[static_cast<std::size_t>(d)])
    return std::nullopt;
  std::vector<int> dist = dist_to_target(t, d, node_removed, edge_removed);
  if (dist[static_cast<std::size_t>(s)] == -1) return std::nullopt;
  Path path{s};
  int u = s;
  while (u != d) {
    int best = -1;
    for (int e : t.out_edges(u)) {
      if (edge_removed[static_cast<std::size_t>(e)]) continue;
      int v = t.edge(e).dst;
      if (node_removed[static_cast<std::size_t>(v)]) continue;
      if (dist[static_cast<std::size_t>(v)] == dist[static_cast<std::size_t>(u)] - 1 &&
          (best == -1 || v < best))
        best = v;
    }
    path.push_back(best);
    u = best;
  }
  return path;
}

struct PathOrder {
  bool operator()(const Path& a, const Path& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

}  // namespace detail

// Yen's k-shortest loop-free paths with hop-count edge length.  Output is
// sorted by (hop count, lexicographic node sequence) and contains at most k
// pairwise-distinct simple paths; empty when d is unreachable from s.
inline std::vector<Path> yen_ksp(const Topology& t, int s, int d, int k) {
  if (s == d) throw ValidationError("yen_ksp: source equals destination");
  if (s < 0 || s >= t.node_count() || d < 0 || d >= t.node_count())
    throw ValidationError("yen_ksp: node id out of range");
  if (k <= 0) throw ValidationError("yen_ksp: k must be positive");

  std::vector<char> no_node(static_cast<std::size_t>(t.node_count()), 0);
  std::vector<char> no_edge(static_cast<std::size_t>(t.edge_count()), 0);

  std::vector<Path> result;
  auto first = detail::lex_shortest_path(t, s, d, no_node, no_edge);
  if (!first) return result;
  result.push_back(*first);

  std::set<Path, detail::PathOrder> candidates;
  while (static_cast<int>(result.size()) < k) {
    const Path& prev = result.back();
    // Deviate at every node of the previous path except the destination.
    for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
      Path root(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(i + 1));
      std::vector<char> node_removed = no_node;
      std::vector<char> edge_removed = no_edge;
      // Remove edges used by previously accepted paths sharing this root.
      for (const Path& p : result) {
        if (p.size() > i && std::equal(root.begin(), root.end(), p.begin())) {
          int eid = t.edge_id(p[i], p[i + 1]);
          if (eid >= 0) edge_removed[static_cast<std::size_t>(eid)] = 1;
        }
      }
      // Root nodes other than the spur node must not reappear.
      for (std::size_t j = 0; j < i; ++j) node_removed[static_cast<std::size_t>(root[j])] = 1;
      auto spur = detail::lex_shortest_path(t, prev[i], d, node_removed, edge_removed);
      if (!spur) continue;
      Path total = root;
      total.insert(total.end(), spur->begin() + 1, spur->end());
      bool known = std::find(result.begin(), result.end(), total) != result.end();
      if (!known) candidates.insert(total);
    }
    if (candidates.empty()) break;
    result.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }
  return result;
}

// Candidate paths for every reachable ordered pair, padded to exactly k per
// pair by repeating the last available path, plus the path/edge incidence
// used by the objective evaluations.
class PathCatalog {
 public:
  PathCatalog(const Topology& t, int k, std::vector<std::pair<int, int>> pairs,
              std::vector<Path> paths, std::vector<int> distinct_counts)
      : k_(k),
        node_count_(t.node_count()),
        edge_count_(t.edge_count()),
        pairs_(std::move(pairs)),
        paths_(std::move(paths)),
        distinct_counts_(std::move(distinct_counts)) {
    build_incidence(t);
  }

  int k() const { return k_; }
  int node_count() const { return node_count_; }
  int edge_count() const { return edge_count_; }
  std::size_t pair_count() const { return pairs_.size(); }
  std::size_t slot_count() const { return pairs_.size() * static_cast<std::size_t>(k_); }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  const std::pair<int, int>& pair(std::size_t q) const { return pairs_[q]; }

  // Catalog pair index for (s, t), or npos.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t pair_index(int s, int t) const {
    auto it = pair_index_.find({s, t});
    return it == pair_index_.end() ? npos : it->second;
  }

  std::size_t slot(std::size_t pair_idx, int path_idx) const {
    return pair_idx * static_cast<std::size_t>(k_) + static_cast<std::size_t>(path_idx);
  }
  std::size_t pair_of_slot(std::size_t slot_idx) const { return slot_idx / static_cast<std::size_t>(k_); }

  const Path& path(std::size_t slot_idx) const { return paths_[slot_idx]; }
  int distinct_paths(std::size_t pair_idx) const { return distinct_counts_[pair_idx]; }

  // Edge ids on the path stored in a slot.
  const std::vector<int>& slot_edges(std::size_t slot_idx) const { return slot_edges_[slot_idx]; }
  // Slot ids of paths crossing an edge.
  const std::vector<std::size_t>& edge_slots(int edge_id) const {
    return edge_slots_[static_cast<std::size_t>(edge_id)];
  }

  bool slot_uses_edge(std::size_t slot_idx, int edge_id) const {
    const auto& es = slot_edges_[slot_idx];
    return std::find(es.begin(), es.end(), edge_id) != es.end();
  }

 private:
  void build_incidence(const Topology& t) {
    slot_edges_.resize(paths_.size());
    edge_slots_.assign(static_cast<std::size_t>(edge_count_), {});
    for (std::size_t p = 0; p < paths_.size(); ++p) {
      const Path& path = paths_[p];
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        int eid = t.edge_id(path[i], path[i + 1]);
        if (eid < 0)
          throw ValidationError("path catalog: path uses a non-existent edge");
        slot_edges_[p].push_back(eid);
        edge_slots_[static_cast<std::size_t>(eid)].push_back(p);
      }
    }
    for (std::size_t q = 0; q < pairs_.size(); ++q) pair_index_[pairs_[q]] = q;
  }

  int k_;
  int node_count_;
  int edge_count_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<Path> paths_;  // pair_count * k, padded
  std::vector<int> distinct_counts_;
  std::vector<std::vector<int>> slot_edges_;
  std::vector<std::vector<std::size_t>> edge_slots_;
  std::map<std::pair<int, int>, std::size_t> pair_index_;
};

inline PathCatalog build_catalog(const Topology& t, int k = 4) {
  if (k <= 0) throw ValidationError("build_catalog: k must be positive");
  const int n = t.node_count();
  std::vector<std::pair<int, int>> all_pairs;
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (s != d) all_pairs.push_back({s, d});

  std::vector<std::vector<Path>> found(all_pairs.size());
  parallel_for(all_pairs.size(), [&](std::size_t i) {
    found[i] = yen_ksp(t, all_pairs[i].first, all_pairs[i].second, k);
  });

  std::vector<std::pair<int, int>> pairs;
  std::vector<Path> paths;
  std::vector<int> distinct;
  for (std::size_t i = 0; i < all_pairs.size(); ++i) {
    if (found[i].empty()) continue;  // unreachable: pair excluded from the catalog
    pairs.push_back(all_pairs[i]);
    distinct.push_back(static_cast<int>(found[i].size()));
    for (int j = 0; j < k; ++j) {
      std::size_t idx = std::min(static_cast<std::size_t>(j), found[i].size() - 1);
      paths.push_back(found[i][idx]);
    }
  }
  return PathCatalog(t, k, std::move(pairs), std::move(paths), std::move(distinct));
}

// All catalog pairs originating at a source plus the union of edges their
// candidate paths use (the symbolic support set of the per-source subproblem).
struct SourceSlice {
  int source = -1;
  std::vector<std::size_t> pair_indices;
  std::vector<int> edge_subset;  // ascending edge ids
};

inline SourceSlice restrict_to_source(const PathCatalog& cat, int source) {
  SourceSlice slice;
  slice.source = source;
  std::set<int> edges;
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    if (cat.pair(q).first != source) continue;
    slice.pair_indices.push_back(q);
    for (int j = 0; j < cat.k(); ++j)
      for (int e : cat.slot_edges(cat.slot(q, j))) edges.insert(e);
  }
  slice.edge_subset.assign(edges.begin(), edges.end());
  return slice;
}

// ---------------------------------------------------------------------------
// Text serialization: "s t : n0-n1-...-nm | ..." one line per pair, k path
// fields per line (padding included so the file rebuilds the exact catalog).
// ---------------------------------------------------------------------------

inline void write_catalog(const PathCatalog& cat, std::ostream& out) {
  out << "k " << cat.k() << "\n";
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    out << cat.pair(q).first << " " << cat.pair(q).second << " :";
    for (int j = 0; j < cat.k(); ++j) {
      const Path& p = cat.path(cat.slot(q, j));
      out << (j == 0 ? " " : " | ");
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out << "-";
        out << p[i];
      }
    }
    out << "\n";
  }
}

inline void save_catalog(const PathCatalog& cat, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  write_catalog(cat, out);
}

inline PathCatalog parse_catalog(std::istream& in, const Topology& t,
                                 const std::string& origin = "<stream>") {
  std::string line;
  int line_no = 0;
  int k = -1;
  std::vector<std::pair<int, int>> pairs;
  std::vector<Path> paths;
  std::vector<int> distinct;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (k < 0) {
      std::string tag;
      if (!(ls >> tag >> k) || tag != "k" || k <= 0)
        throw ParseError(origin + ":" + std::to_string(line_no) + ": expected header \"k K\"");
      continue;
    }
    int s, d;
    std::string colon;
    if (!(ls >> s >> d >> colon) || colon != ":")
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected \"s t : paths\"");
    pairs.push_back({s, d});
    std::string rest;
    std::getline(ls, rest);
    std::vector<Path> row;
    std::istringstream fields(rest);
    std::string field;
    while (std::getline(fields, field, '|')) {
      Path p;
      std::istringstream nodes(field);
      std::string tok;
      while (std::getline(nodes, tok, '-')) {
        if (tok.find_first_not_of(" \t") == std::string::npos) continue;
        p.push_back(std::stoi(tok));
      }
      if (!p.empty()) row.push_back(std::move(p));
    }
    if (static_cast<int>(row.size()) != k)
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(k) + " path fields");
    int dcount = 1;
    for (std::size_t i = 1; i < row.size(); ++i)
      if (row[i] != row[i - 1]) ++dcount;
    distinct.push_back(dcount);
    for (auto& p : row) paths.push_back(std::move(p));
  }
  if (k < 0) throw ParseError(origin + ": missing \"k K\" header");
  return PathCatalog(t, k, std::move(pairs), std::move(paths), std::move(distinct));
}

inline PathCatalog load_catalog(const std::string& path, const Topology& t) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open catalog file: " + path);
  return parse_catalog(in, t, path);
}

}  // namespace mcf
