#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mcf/common.hpp"
#include "mcf/demand.hpp"
#include "mcf/path_catalog.hpp"
#include "mcf/topology.hpp"

namespace mcf {

enum class Objective { Mlu, Mtf, Mcf };

inline const char* objective_name(Objective o) {
  switch (o) {
    case Objective::Mlu: return "mlu";
    case Objective::Mtf: return "mtf";
    case Objective::Mcf: return "mcf";
  }
  return "?";
}

// Per-path values in catalog slot order.  Weights mode holds per-pair split
// ratios (a probability simplex per pair); planned-flows mode holds proposed
// per-path flow amounts.
struct Allocation {
  enum class Mode { Weights, PlannedFlows };
  Mode mode = Mode::Weights;
  std::vector<double> values;

  static Allocation uniform_weights(const PathCatalog& cat) {
    Allocation a;
    a.mode = Mode::Weights;
    a.values.assign(cat.slot_count(), 1.0 / static_cast<double>(cat.k()));
    return a;
  }

  static Allocation zero_flows(const PathCatalog& cat) {
    Allocation a;
    a.mode = Mode::PlannedFlows;
    a.values.assign(cat.slot_count(), 0.0);
    return a;
  }
};

namespace detail {

inline void check_dim(std::span<const double> values, const PathCatalog& cat, const char* who) {
  if (values.size() != cat.slot_count())
    throw ValidationError(std::string(who) + ": value vector has " +
                          std::to_string(values.size()) + " entries, catalog has " +
                          std::to_string(cat.slot_count()) + " slots");
}

}  // namespace detail

// Edge loads from split weights: load(e) = sum over paths through e of
// demand * weight.  Weights are taken as-is (no renormalization).
inline std::vector<double> edge_loads_from_weights(std::span<const double> weights,
                                                   const DemandMatrix& d, const PathCatalog& cat,
                                                   const Topology& t) {
  detail::check_dim(weights, cat, "edge_loads_from_weights");
  std::vector<double> load(static_cast<std::size_t>(t.edge_count()), 0.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    if (demand == 0.0) continue;
    for (int j = 0; j < cat.k(); ++j) {
      std::size_t slot = cat.slot(q, j);
      double w = weights[slot];
      if (w == 0.0) continue;
      for (int e : cat.slot_edges(slot)) load[static_cast<std::size_t>(e)] += demand * w;
    }
  }
  return load;
}

inline std::vector<double> edge_loads_from_flows(std::span<const double> flows,
                                                 const PathCatalog& cat, const Topology& t) {
  detail::check_dim(flows, cat, "edge_loads_from_flows");
  std::vector<double> load(static_cast<std::size_t>(t.edge_count()), 0.0);
  for (std::size_t slot = 0; slot < cat.slot_count(); ++slot) {
    double f = flows[slot];
    if (f == 0.0) continue;
    for (int e : cat.slot_edges(slot)) load[static_cast<std::size_t>(e)] += f;
  }
  return load;
}

// MLU of raw split weights, with no per-pair renormalization.  On per-pair
// simplex points this equals eval_mlu; it is the max-of-linear form whose
// subgradients subgradient_mlu reports.
inline double eval_mlu_unnormalized(std::span<const double> weights, const DemandMatrix& d,
                                    const PathCatalog& cat, const Topology& t) {
  std::vector<double> load = edge_loads_from_weights(weights, d, cat, t);
  double mlu = 0.0;
  for (int e = 0; e < t.edge_count(); ++e)
    mlu = std::max(mlu, load[static_cast<std::size_t>(e)] / t.capacity(e));
  return mlu;
}

// Renormalizes each pair's weights to sum to 1, as the reward computation
// does, so upstream heads need not emit exact simplex points.  Pairs with
// zero demand and zero weight mass contribute nothing.
inline std::vector<double> normalize_weights(std::span<const double> weights,
                                             const PathCatalog& cat, const DemandMatrix& d) {
  detail::check_dim(weights, cat, "normalize_weights");
  std::vector<double> out(weights.begin(), weights.end());
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double sum = 0.0;
    for (int j = 0; j < cat.k(); ++j) sum += weights[cat.slot(q, j)];
    if (sum <= 0.0) {
      if (d(cat.pair(q).first, cat.pair(q).second) > 0.0)
        throw ValidationError("eval_mlu: pair (" + std::to_string(cat.pair(q).first) + "," +
                              std::to_string(cat.pair(q).second) +
                              ") has zero weight mass but nonzero demand");
      continue;
    }
    for (int j = 0; j < cat.k(); ++j) out[cat.slot(q, j)] = weights[cat.slot(q, j)] / sum;
  }
  return out;
}

inline double eval_mlu(const Allocation& a, const DemandMatrix& d, const PathCatalog& cat,
                       const Topology& t) {
  if (a.mode != Allocation::Mode::Weights)
    throw ValidationError("eval_mlu: allocation must be in weights mode");
  std::vector<double> w = normalize_weights(a.values, cat, d);
  return eval_mlu_unnormalized(w, d, cat, t);
}

// Feasibility-scaled flow metrics.  gamma = max(max_e load_e / c_e, 1)
// uniformly shrinks planned flows so no capacity is exceeded; per-pair
// delivered flow is then capped by demand.
struct FlowMetrics {
  double mtf = 0.0;
  double mcf = 1.0;  // 1 when no pair has positive demand
  double gamma = 1.0;
  std::vector<double> scaled_flows;      // per slot
  std::vector<double> delivered;         // per pair
};

inline FlowMetrics eval_mtf_mcf(const Allocation& a, const DemandMatrix& d, const PathCatalog& cat,
                                const Topology& t) {
  if (a.mode != Allocation::Mode::PlannedFlows)
    throw ValidationError("eval_mtf_mcf: allocation must be in planned-flows mode");
  detail::check_dim(a.values, cat, "eval_mtf_mcf");
  for (double v : a.values)
    if (!(v >= 0.0)) throw ValidationError("eval_mtf_mcf: planned flows must be nonnegative");

  std::vector<double> load = edge_loads_from_flows(a.values, cat, t);
  double gamma = 1.0;
  for (int e = 0; e < t.edge_count(); ++e)
    gamma = std::max(gamma, load[static_cast<std::size_t>(e)] / t.capacity(e));

  FlowMetrics m;
  m.gamma = gamma;
  m.scaled_flows.resize(cat.slot_count());
  for (std::size_t slot = 0; slot < cat.slot_count(); ++slot)
    m.scaled_flows[slot] = a.values[slot] / gamma;

  m.delivered.resize(cat.pair_count());
  double mcf = std::numeric_limits<double>::infinity();
  bool any_demand = false;
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double sum = 0.0;
    for (int j = 0; j < cat.k(); ++j) sum += m.scaled_flows[cat.slot(q, j)];
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    double delivered = std::min(sum, demand);
    m.delivered[q] = delivered;
    m.mtf += delivered;
    if (demand > 0.0) {
      any_demand = true;
      mcf = std::min(mcf, delivered / demand);
    }
  }
  m.mcf = any_demand ? mcf : 1.0;
  return m;
}

// Mean satisfaction ratio over pairs with positive demand (the experimental
// stand-in for the concurrent-flow objective).
inline double eval_avg_satisfaction(const Allocation& a, const DemandMatrix& d,
                                    const PathCatalog& cat, const Topology& t) {
  FlowMetrics m = eval_mtf_mcf(a, d, cat, t);
  double sum = 0.0;
  int count = 0;
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    if (demand > 0.0) {
      sum += m.delivered[q] / demand;
      ++count;
    }
  }
  return count == 0 ? 1.0 : sum / static_cast<double>(count);
}

// Subgradient of the max-of-linear MLU at the given weights, taking the
// lowest-index maximizing edge: entry for slot p is D_pair / c_e* when the
// slot's path crosses e*, else 0.  Valid for eval_mlu restricted to feasible
// (per-pair simplex) allocations.
inline std::vector<double> subgradient_mlu(const Allocation& a, const DemandMatrix& d,
                                           const PathCatalog& cat, const Topology& t) {
  if (a.mode != Allocation::Mode::Weights)
    throw ValidationError("subgradient_mlu: allocation must be in weights mode");
  detail::check_dim(a.values, cat, "subgradient_mlu");
  std::vector<double> g(cat.slot_count(), 0.0);
  if (d.total() == 0.0) return g;
  std::vector<double> load = edge_loads_from_weights(a.values, d, cat, t);
  int best = 0;
  double best_u = -1.0;
  for (int e = 0; e < t.edge_count(); ++e) {
    double u = load[static_cast<std::size_t>(e)] / t.capacity(e);
    if (u > best_u) {
      best_u = u;
      best = e;
    }
  }
  double cap = t.capacity(best);
  for (std::size_t slot : cat.edge_slots(best)) {
    std::size_t q = cat.pair_of_slot(slot);
    g[slot] = d(cat.pair(q).first, cat.pair(q).second) / cap;
  }
  return g;
}

}  // namespace mcf
