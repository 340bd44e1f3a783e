#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcf/common.hpp"

namespace mcf {

struct Edge {
  int src = 0;
  int dst = 0;
};

inline bool operator==(const Edge& a, const Edge& b) { return a.src == b.src && a.dst == b.dst; }

// Directed capacitated graph.  Node ids are 0..node_count-1, edges are unique
// directed (src, dst) pairs with strictly positive capacity.  Immutable after
// construction; safe to share across threads.
class Topology {
 public:
  Topology(int node_count, std::vector<Edge> edges, std::vector<double> capacities)
      : node_count_(node_count), edges_(std::move(edges)), capacities_(std::move(capacities)) {
    validate();
    build_adjacency();
  }

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }
  double capacity(int e) const { return capacities_[static_cast<std::size_t>(e)]; }
  const std::vector<double>& capacities() const { return capacities_; }

  // Edge ids leaving / entering a node.
  const std::vector<int>& out_edges(int u) const { return out_edges_[static_cast<std::size_t>(u)]; }
  const std::vector<int>& in_edges(int u) const { return in_edges_[static_cast<std::size_t>(u)]; }

  // Edge id for (u, v), or -1.
  int edge_id(int u, int v) const {
    for (int e : out_edges_[static_cast<std::size_t>(u)]) {
      if (edges_[static_cast<std::size_t>(e)].dst == v) return e;
    }
    return -1;
  }

  double max_capacity() const {
    double m = 0.0;
    for (double c : capacities_) m = std::max(m, c);
    return m;
  }

  double min_capacity() const {
    double m = std::numeric_limits<double>::infinity();
    for (double c : capacities_) m = std::min(m, c);
    return m;
  }

 private:
  void validate() const {
    if (node_count_ <= 0) throw ValidationError("topology: node count must be positive");
    if (edges_.size() != capacities_.size())
      throw ValidationError("topology: edge/capacity count mismatch");
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      if (e.src < 0 || e.src >= node_count_ || e.dst < 0 || e.dst >= node_count_)
        throw ValidationError("topology: edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + ") references an unknown node");
      if (e.src == e.dst)
        throw ValidationError("topology: self-loop edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + ")");
      if (!seen.insert({e.src, e.dst}).second)
        throw ValidationError("topology: duplicate edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + ")");
      double c = capacities_[i];
      if (!(c > 0.0) || !std::isfinite(c))
        throw ValidationError("topology: capacity of edge (" + std::to_string(e.src) + "," +
                              std::to_string(e.dst) + ") must be a positive real");
    }
  }

  void build_adjacency() {
    out_edges_.assign(static_cast<std::size_t>(node_count_), {});
    in_edges_.assign(static_cast<std::size_t>(node_count_), {});
    for (int e = 0; e < edge_count(); ++e) {
      out_edges_[static_cast<std::size_t>(edges_[static_cast<std::size_t>(e)].src)].push_back(e);
      in_edges_[static_cast<std::size_t>(edges_[static_cast<std::size_t>(e)].dst)].push_back(e);
    }
  }

  int node_count_;
  std::vector<Edge> edges_;
  std::vector<double> capacities_;
  std::vector<std::vector<int>> out_edges_;
  std::vector<std::vector<int>> in_edges_;
};

// ---------------------------------------------------------------------------
// Edge-list text format.  One header line "nodes N", then one "src dst
// capacity" line per edge (0-based node ids).  Blank lines and lines starting
// with '#' are skipped.  Capacities round-trip exactly.
// ---------------------------------------------------------------------------

inline Topology parse_topology(std::istream& in, const std::string& origin = "<stream>") {
  std::string line;
  int line_no = 0;
  int node_count = -1;
  std::vector<Edge> edges;
  std::vector<double> caps;
  while (std::getline(in, line)) {
    ++line_no;
    std::string trimmed = line;
    auto first = trimmed.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (trimmed[first] == '#') continue;
    std::istringstream ls(trimmed);
    if (node_count < 0) {
      std::string tag;
      if (!(ls >> tag >> node_count) || tag != "nodes" || node_count <= 0)
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": expected header line \"nodes N\"");
      continue;
    }
    Edge e;
    double c;
    if (!(ls >> e.src >> e.dst >> c))
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected \"src dst capacity\"");
    std::string rest;
    if (ls >> rest)
      throw ParseError(origin + ":" + std::to_string(line_no) + ": trailing tokens");
    edges.push_back(e);
    caps.push_back(c);
  }
  if (node_count < 0) throw ParseError(origin + ": missing \"nodes N\" header");
  if (edges.empty()) throw ParseError(origin + ": no edges");
  return Topology(node_count, std::move(edges), std::move(caps));
}

inline Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open topology file: " + path);
  return parse_topology(in, path);
}

inline void write_topology(const Topology& t, std::ostream& out) {
  out << "nodes " << t.node_count() << "\n";
  for (int e = 0; e < t.edge_count(); ++e) {
    out << t.edge(e).src << " " << t.edge(e).dst << " " << format_double(t.capacity(e)) << "\n";
  }
}

inline void save_topology(const Topology& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  write_topology(t, out);
}

// ---------------------------------------------------------------------------
// Strongly connected components.
// ---------------------------------------------------------------------------

struct SccResult {
  Topology graph;
  std::vector<int> old_to_new;  // -1 for dropped nodes
  std::vector<int> new_to_old;
};

// Largest SCC, ties broken by the smallest original node id contained in the
// component.  Retained nodes are renumbered by ascending original id.
// Iterative Tarjan so deep graphs cannot overflow the stack.
inline SccResult largest_scc(const Topology& t) {
  const int n = t.node_count();
  std::vector<int> index(static_cast<std::size_t>(n), -1);
  std::vector<int> low(static_cast<std::size_t>(n), 0);
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  int next_index = 0;
  int comp_count = 0;

  struct Frame {
    int node;
    std::size_t edge_pos;
  };
  for (int root = 0; root < n; ++root) {
    if (index[static_cast<std::size_t>(root)] != -1) continue;
    std::vector<Frame> call;
    call.push_back({root, 0});
    index[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = next_index++;
    stack.push_back(root);
    on_stack[static_cast<std::size_t>(root)] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto& outs = t.out_edges(f.node);
      if (f.edge_pos < outs.size()) {
        int v = t.edge(outs[f.edge_pos]).dst;
        ++f.edge_pos;
        if (index[static_cast<std::size_t>(v)] == -1) {
          index[static_cast<std::size_t>(v)] = low[static_cast<std::size_t>(v)] = next_index++;
          stack.push_back(v);
          on_stack[static_cast<std::size_t>(v)] = 1;
          call.push_back({v, 0});
        } else if (on_stack[static_cast<std::size_t>(v)]) {
          low[static_cast<std::size_t>(f.node)] =
              std::min(low[static_cast<std::size_t>(f.node)], index[static_cast<std::size_t>(v)]);
        }
      } else {
        int u = f.node;
        call.pop_back();
        if (!call.empty()) {
          int parent = call.back().node;
          low[static_cast<std::size_t>(parent)] =
              std::min(low[static_cast<std::size_t>(parent)], low[static_cast<std::size_t>(u)]);
        }
        if (low[static_cast<std::size_t>(u)] == index[static_cast<std::size_t>(u)]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[static_cast<std::size_t>(w)] = 0;
            comp[static_cast<std::size_t>(w)] = comp_count;
            if (w == u) break;
          }
          ++comp_count;
        }
      }
    }
  }

  std::vector<int> comp_size(static_cast<std::size_t>(comp_count), 0);
  std::vector<int> comp_min_node(static_cast<std::size_t>(comp_count), n);
  for (int v = 0; v < n; ++v) {
    int c = comp[static_cast<std::size_t>(v)];
    ++comp_size[static_cast<std::size_t>(c)];
    comp_min_node[static_cast<std::size_t>(c)] = std::min(comp_min_node[static_cast<std::size_t>(c)], v);
  }
  int best = 0;
  for (int c = 1; c < comp_count; ++c) {
    if (comp_size[static_cast<std::size_t>(c)] > comp_size[static_cast<std::size_t>(best)] ||
        (comp_size[static_cast<std::size_t>(c)] == comp_size[static_cast<std::size_t>(best)] &&
         comp_min_node[static_cast<std::size_t>(c)] < comp_min_node[static_cast<std::size_t>(best)]))
      best = c;
  }

  std::vector<int> old_to_new(static_cast<std::size_t>(n), -1);
  std::vector<int> new_to_old;
  for (int v = 0; v < n; ++v) {
    if (comp[static_cast<std::size_t>(v)] == best) {
      old_to_new[static_cast<std::size_t>(v)] = static_cast<int>(new_to_old.size());
      new_to_old.push_back(v);
    }
  }
  std::vector<Edge> edges;
  std::vector<double> caps;
  for (int e = 0; e < t.edge_count(); ++e) {
    int s = old_to_new[static_cast<std::size_t>(t.edge(e).src)];
    int d = old_to_new[static_cast<std::size_t>(t.edge(e).dst)];
    if (s != -1 && d != -1) {
      edges.push_back({s, d});
      caps.push_back(t.capacity(e));
    }
  }
  return SccResult{Topology(static_cast<int>(new_to_old.size()), std::move(edges), std::move(caps)),
                   std::move(old_to_new), std::move(new_to_old)};
}

// Removes the given edges; node ids are preserved.  Keeping the
// positive-capacity invariant means failed links disappear rather than
// carrying capacity zero.
inline Topology zero_capacities(const Topology& t, const std::set<int>& failed) {
  for (int e : failed) {
    if (e < 0 || e >= t.edge_count())
      throw ValidationError("zero_capacities: unknown edge id " + std::to_string(e));
  }
  std::vector<Edge> edges;
  std::vector<double> caps;
  for (int e = 0; e < t.edge_count(); ++e) {
    if (failed.count(e)) continue;
    edges.push_back(t.edge(e));
    caps.push_back(t.capacity(e));
  }
  return Topology(t.node_count(), std::move(edges), std::move(caps));
}

}  // namespace mcf
