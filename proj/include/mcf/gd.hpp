#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mcf/common.hpp"
#include "mcf/lp_solvers.hpp"
#include "mcf/objectives.hpp"

namespace mcf {

struct GdConfig {
  enum class Schedule { Constant, InvSqrt, Diminishing };
  Schedule schedule = Schedule::Constant;
  double eta = 0.05;
  int iterations = 1000;
  bool averaging = false;
  // Optional plateau stop: relative best-value improvement below
  // plateau_rel_tol over plateau_window iterations.  0 disables.
  int plateau_window = 0;
  double plateau_rel_tol = 1e-8;

  double step(int t1based) const {
    switch (schedule) {
      case Schedule::Constant: return eta;
      case Schedule::InvSqrt: return eta / std::sqrt(static_cast<double>(t1based));
      case Schedule::Diminishing: return eta / static_cast<double>(t1based);
    }
    return eta;
  }
};

struct TracePoint {
  int iteration = 0;
  double objective = 0.0;
  double step = 0.0;
};

struct GdResult {
  Allocation allocation;
  double objective = 0.0;
  std::vector<TracePoint> trace;
};

// Euclidean projection of each pair's block onto the probability simplex
// (sorting form); idempotent on feasible blocks.
inline std::vector<double> project_simplex_blocks(std::span<const double> v,
                                                  const PathCatalog& cat) {
  if (v.size() != cat.slot_count())
    throw ValidationError("project_simplex_blocks: dimension mismatch");
  std::vector<double> out(v.begin(), v.end());
  const int k = cat.k();
  std::vector<double> sorted(static_cast<std::size_t>(k));
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double* block = out.data() + cat.slot(q, 0);
    for (int j = 0; j < k; ++j) sorted[static_cast<std::size_t>(j)] = block[j];
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    for (int j = 0; j < k; ++j) {
      running += sorted[static_cast<std::size_t>(j)];
      double candidate = (running - 1.0) / static_cast<double>(j + 1);
      if (sorted[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
    }
    for (int j = 0; j < k; ++j) block[j] = std::max(block[j] - theta, 0.0);
  }
  return out;
}

// Expected MLU of raw weights over a scenario set.
inline double expected_mlu(std::span<const double> weights, const std::vector<Scenario>& scenarios,
                           const PathCatalog& cat, const Topology& t) {
  double acc = 0.0;
  for (const Scenario& s : scenarios)
    acc += s.prob * eval_mlu_unnormalized(weights, s.demand, cat, t);
  return acc;
}

// ---------------------------------------------------------------------------
// Constants of the convergence guarantee, exposed as diagnostics.
// ---------------------------------------------------------------------------

// B: bound on the distance between any two feasible configurations (each of
// the pair_count blocks lies in a k-simplex).
inline double gd_norm_bound(const PathCatalog& cat) {
  return std::sqrt(static_cast<double>(cat.slot_count()));
}

// rho: directly provable l2 bound on any expected-MLU subgradient — the worst
// edge's column norm sqrt(sum over paths through e of (D_pair / c_e)^2),
// maximized over scenarios.
inline double gd_mlu_subgradient_bound(const Topology& t, const PathCatalog& cat,
                                       const std::vector<Scenario>& scenarios) {
  double worst = 0.0;
  for (const Scenario& s : scenarios) {
    for (int e = 0; e < t.edge_count(); ++e) {
      double acc = 0.0;
      for (std::size_t slot : cat.edge_slots(e)) {
        std::size_t q = cat.pair_of_slot(slot);
        double d = s.demand(cat.pair(q).first, cat.pair(q).second) / t.capacity(e);
        acc += d * d;
      }
      worst = std::max(worst, std::sqrt(acc));
    }
  }
  return worst;
}

// The paper-style ratio D_max / c_min (a per-coordinate constant; see the
// l1-form Lipschitz property in the tests).
inline double gd_dmax_over_cmin(const Topology& t, const std::vector<Scenario>& scenarios) {
  double dmax = 0.0;
  for (const Scenario& s : scenarios) dmax = std::max(dmax, s.demand.max_entry());
  return dmax / t.min_capacity();
}

// Step size eta = sqrt(B^2 / (rho^2 T)) attaining the B*rho/sqrt(T) averaged
// -iterate guarantee.
inline double gd_theory_step(double norm_bound, double grad_bound, int iterations) {
  if (grad_bound <= 0.0) return 1.0;
  return norm_bound / (grad_bound * std::sqrt(static_cast<double>(iterations)));
}

// ---------------------------------------------------------------------------
// Projected subgradient descent on the expected MLU.
// ---------------------------------------------------------------------------
inline GdResult gd_minimize_mlu(const Topology& t, const PathCatalog& cat,
                                const std::vector<Scenario>& scenarios, const GdConfig& cfg,
                                const Allocation& init) {
  if (cfg.iterations < 1) throw ValidationError("gd_minimize_mlu: iterations must be >= 1");
  if (init.mode != Allocation::Mode::Weights)
    throw ValidationError("gd_minimize_mlu: init must be weights");
  double prob_sum = 0.0;
  for (const Scenario& s : scenarios) prob_sum += s.prob;
  if (std::abs(prob_sum - 1.0) > 1e-9)
    throw ValidationError("gd_minimize_mlu: scenario probabilities must sum to 1");

  std::vector<double> pi = project_simplex_blocks(init.values, cat);
  std::vector<double> avg(pi.size(), 0.0);
  std::vector<double> grad(pi.size());
  GdResult res;
  res.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  double best = std::numeric_limits<double>::infinity();
  int since_improve = 0;

  Allocation work;
  work.mode = Allocation::Mode::Weights;
  for (int it = 1; it <= cfg.iterations; ++it) {
    double obj = expected_mlu(pi, scenarios, cat, t);
    double eta = cfg.step(it);
    res.trace.push_back({it, obj, eta});

    if (obj < best * (1.0 - cfg.plateau_rel_tol)) {
      best = obj;
      since_improve = 0;
    } else {
      ++since_improve;
    }

    for (std::size_t i = 0; i < avg.size(); ++i)
      avg[i] += (pi[i] - avg[i]) / static_cast<double>(it);

    if (cfg.plateau_window > 0 && since_improve >= cfg.plateau_window) break;

    // The update also runs at it == T so the averaged iterate carries the
    // full T-step guarantee; the trailing iterate is discarded.
    std::fill(grad.begin(), grad.end(), 0.0);
    work.values.assign(pi.begin(), pi.end());
    for (const Scenario& s : scenarios) {
      std::vector<double> g = subgradient_mlu(work, s.demand, cat, t);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += s.prob * g[i];
    }
    for (std::size_t i = 0; i < pi.size(); ++i) pi[i] -= eta * grad[i];
    pi = project_simplex_blocks(pi, cat);
  }

  res.allocation.mode = Allocation::Mode::Weights;
  res.allocation.values = cfg.averaging ? avg : pi;
  res.objective = expected_mlu(res.allocation.values, scenarios, cat, t);
  return res;
}

// ---------------------------------------------------------------------------
// Normalized gradient ascent on the feasibility-scaled flow objectives
// (quasi-concave; best iterate is returned, not the average).
// ---------------------------------------------------------------------------

namespace detail {

inline double scaled_flow_objective(std::span<const double> x, const DemandMatrix& d,
                                    const PathCatalog& cat, const Topology& t,
                                    Objective objective) {
  Allocation a;
  a.mode = Allocation::Mode::PlannedFlows;
  a.values.assign(x.begin(), x.end());
  FlowMetrics m = eval_mtf_mcf(a, d, cat, t);
  return objective == Objective::Mtf ? m.mtf : m.mcf;
}

// Analytic gradient of the scaled objective away from its kinks; central
// finite differences (step 1e-6) when an active piece is ambiguous.
inline std::vector<double> scaled_flow_gradient(const std::vector<double>& x,
                                                const DemandMatrix& d, const PathCatalog& cat,
                                                const Topology& t, Objective objective) {
  const double tie_tol = 1e-7;
  std::vector<double> load = edge_loads_from_flows(x, cat, t);
  double u = 0.0;
  int argmax_e = -1;
  int near_ties = 0;
  for (int e = 0; e < t.edge_count(); ++e) {
    double r = load[static_cast<std::size_t>(e)] / t.capacity(e);
    if (r > u) {
      u = r;
      argmax_e = e;
    }
  }
  for (int e = 0; e < t.edge_count(); ++e) {
    double r = load[static_cast<std::size_t>(e)] / t.capacity(e);
    if (u - r < tie_tol * std::max(1.0, u)) ++near_ties;
  }
  double gamma = std::max(u, 1.0);
  bool kink = std::abs(u - 1.0) < tie_tol || (u > 1.0 && near_ties > 1);

  std::vector<double> sums(cat.pair_count(), 0.0);
  std::vector<char> saturated(cat.pair_count(), 0);
  double min_ratio = std::numeric_limits<double>::infinity();
  std::size_t argmin_q = PathCatalog::npos;
  int ratio_ties = 0;
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    for (int j = 0; j < cat.k(); ++j) sums[q] += x[cat.slot(q, j)];
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    if (demand <= 0.0) continue;
    double scaled = sums[q] / gamma;
    if (std::abs(scaled - demand) < tie_tol * std::max(1.0, demand)) kink = true;
    saturated[q] = scaled >= demand ? 1 : 0;
    double ratio = std::min(scaled, demand) / demand;
    if (ratio < min_ratio) {
      min_ratio = ratio;
      argmin_q = q;
    }
  }
  if (objective == Objective::Mcf && argmin_q != PathCatalog::npos) {
    for (std::size_t q = 0; q < cat.pair_count(); ++q) {
      double demand = d(cat.pair(q).first, cat.pair(q).second);
      if (demand <= 0.0) continue;
      double ratio = std::min(sums[q] / gamma, demand) / demand;
      if (ratio - min_ratio < tie_tol * std::max(1.0, std::abs(min_ratio))) ++ratio_ties;
    }
    if (ratio_ties > 1) kink = true;
  }

  std::vector<double> g(x.size(), 0.0);
  if (!kink) {
    if (u <= 1.0) {
      // Unscaled region: d delivered_q / d x_p = 1 on unsaturated pairs.
      if (objective == Objective::Mtf) {
        for (std::size_t q = 0; q < cat.pair_count(); ++q) {
          if (d(cat.pair(q).first, cat.pair(q).second) <= 0.0 || saturated[q]) continue;
          for (int j = 0; j < cat.k(); ++j) g[cat.slot(q, j)] = 1.0;
        }
      } else if (argmin_q != PathCatalog::npos && !saturated[argmin_q]) {
        double demand = d(cat.pair(argmin_q).first, cat.pair(argmin_q).second);
        for (int j = 0; j < cat.k(); ++j) g[cat.slot(argmin_q, j)] = 1.0 / demand;
      }
      return g;
    }
    // Scaled region with a unique binding edge e*: delivered_q =
    // S_q * c_e* / L_e*, so the quotient rule applies coordinatewise.  Every
    // slot crossing e* moves L_e*, including slots of zero-demand or
    // saturated pairs.
    double load_star = load[static_cast<std::size_t>(argmax_e)];
    double cap_star = t.capacity(argmax_e);
    if (objective == Objective::Mtf) {
      double unsat_mass = 0.0;
      for (std::size_t q = 0; q < cat.pair_count(); ++q)
        if (d(cat.pair(q).first, cat.pair(q).second) > 0.0 && !saturated[q]) unsat_mass += sums[q];
      for (std::size_t slot : cat.edge_slots(argmax_e))
        g[slot] -= cap_star * unsat_mass / (load_star * load_star);
      for (std::size_t q = 0; q < cat.pair_count(); ++q) {
        if (d(cat.pair(q).first, cat.pair(q).second) <= 0.0 || saturated[q]) continue;
        for (int j = 0; j < cat.k(); ++j) g[cat.slot(q, j)] += cap_star / load_star;
      }
    } else if (argmin_q != PathCatalog::npos && !saturated[argmin_q]) {
      double demand = d(cat.pair(argmin_q).first, cat.pair(argmin_q).second);
      for (std::size_t slot : cat.edge_slots(argmax_e))
        g[slot] -= cap_star * sums[argmin_q] / (load_star * load_star * demand);
      for (int j = 0; j < cat.k(); ++j)
        g[cat.slot(argmin_q, j)] += cap_star / (load_star * demand);
    }
    return g;
  }

  // Kink: central differences of the scaled objective.
  const double h = 1e-6;
  std::vector<double> probe(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = x[i];
    probe[i] = orig + h;
    double up = scaled_flow_objective(probe, d, cat, t, objective);
    probe[i] = std::max(orig - h, 0.0);
    double down = scaled_flow_objective(probe, d, cat, t, objective);
    g[i] = (up - down) / (orig + h - std::max(orig - h, 0.0));
    probe[i] = orig;
  }
  return g;
}

}  // namespace detail

inline GdResult ga_maximize_flow(const Topology& t, const PathCatalog& cat,
                                 const std::vector<Scenario>& scenarios, const GdConfig& cfg,
                                 const Allocation& init, Objective objective) {
  if (objective == Objective::Mlu)
    throw ValidationError("ga_maximize_flow: objective must be mtf or mcf");
  if (init.mode != Allocation::Mode::PlannedFlows)
    throw ValidationError("ga_maximize_flow: init must be planned flows");
  for (double v : init.values)
    if (!(v >= 0.0)) throw ValidationError("ga_maximize_flow: init must be nonnegative");

  std::vector<double> x = init.values;
  auto objective_at = [&](const std::vector<double>& point) {
    double acc = 0.0;
    for (const Scenario& s : scenarios)
      acc += s.prob * detail::scaled_flow_objective(point, s.demand, cat, t, objective);
    return acc;
  };

  GdResult res;
  res.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  std::vector<double> best_x = x;
  double best = objective_at(x);
  int since_improve = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    double obj = objective_at(x);
    double eta = cfg.step(it);
    res.trace.push_back({it, obj, eta});
    if (obj > best + cfg.plateau_rel_tol * std::max(1.0, std::abs(best))) {
      best = obj;
      best_x = x;
      since_improve = 0;
    } else {
      if (obj > best) {
        best = obj;
        best_x = x;
      }
      ++since_improve;
    }
    if (cfg.plateau_window > 0 && since_improve >= cfg.plateau_window) break;
    if (it == cfg.iterations) break;

    std::vector<double> g(x.size(), 0.0);
    for (const Scenario& s : scenarios) {
      std::vector<double> gs = detail::scaled_flow_gradient(x, s.demand, cat, t, objective);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s.prob * gs[i];
    }
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-15) break;  // stationary
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::max(x[i] + eta * g[i] / norm, 0.0);
  }

  res.allocation.mode = Allocation::Mode::PlannedFlows;
  res.allocation.values = best_x;
  res.objective = best;
  return res;
}

}  // namespace mcf
