#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mcf/common.hpp"
#include "mcf/demand.hpp"
#include "mcf/lp.hpp"
#include "mcf/objectives.hpp"
#include "mcf/path_catalog.hpp"
#include "mcf/topology.hpp"

namespace mcf {

// A discrete demand scenario set with probabilities (the expected-objective
// setting of the case study).  A single matrix is the prob=1 special case.
struct Scenario {
  DemandMatrix demand;
  double prob = 1.0;
};

inline std::vector<Scenario> single_scenario(DemandMatrix d) {
  std::vector<Scenario> s;
  s.push_back({std::move(d), 1.0});
  return s;
}

struct SolveResult {
  Allocation allocation;
  double objective = 0.0;
  LpStatus status = LpStatus::Optimal;
  long iterations = 0;
};

namespace detail {

// Variable table for the slots of pairs carrying positive demand; all other
// slots stay out of the LP and are filled with a default afterwards.
struct SlotVars {
  std::vector<int> slot_to_var;  // -1 where absent
  std::vector<std::size_t> var_to_slot;
};

template <typename KeepPair>
SlotVars make_slot_vars(const PathCatalog& cat, LpProblem& lp, const char* prefix,
                        KeepPair keep) {
  SlotVars sv;
  sv.slot_to_var.assign(cat.slot_count(), -1);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    if (!keep(q)) continue;
    for (int j = 0; j < cat.k(); ++j) {
      std::size_t slot = cat.slot(q, j);
      int var = lp.add_var(std::string(prefix) + "[" + std::to_string(cat.pair(q).first) + "," +
                           std::to_string(cat.pair(q).second) + "," + std::to_string(j) + "]");
      sv.slot_to_var[slot] = var;
      sv.var_to_slot.push_back(slot);
    }
  }
  return sv;
}

inline void add_edge_rows_vs_alpha(const Topology& t, const PathCatalog& cat, LpProblem& lp,
                                   const SlotVars& sv, int alpha,
                                   const std::vector<double>& coeff_per_slot,
                                   const std::vector<double>& background) {
  for (int e = 0; e < t.edge_count(); ++e) {
    std::vector<std::pair<int, double>> terms;
    for (std::size_t slot : cat.edge_slots(e)) {
      int var = sv.slot_to_var[slot];
      if (var >= 0 && coeff_per_slot[slot] != 0.0) terms.push_back({var, coeff_per_slot[slot]});
    }
    if (terms.empty() && background[static_cast<std::size_t>(e)] == 0.0) continue;
    terms.push_back({alpha, -t.capacity(e)});
    lp.add_constraint(std::move(terms), RowSense::Le, -background[static_cast<std::size_t>(e)]);
  }
}

inline void require_optimal(const LpSolution& sol, const char* who) {
  if (sol.status != LpStatus::Optimal)
    throw NumericError(std::string(who) + ": LP terminated with status " +
                       lp_status_name(sol.status));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LP-f: minimize MLU over per-path flows that must deliver every demand
// exactly.  The default exact baseline.
// ---------------------------------------------------------------------------

namespace detail {

inline std::pair<LpProblem, SlotVars> build_mlu_flow_lp(const Topology& t, const PathCatalog& cat,
                                                        const DemandMatrix& d, int& alpha_out) {
  LpProblem lp(false);
  auto sv = make_slot_vars(cat, lp, "f", [&](std::size_t q) {
    return d(cat.pair(q).first, cat.pair(q).second) > 0.0;
  });
  alpha_out = lp.add_var("mlu", 1.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    if (demand <= 0.0) continue;
    std::vector<std::pair<int, double>> terms;
    for (int j = 0; j < cat.k(); ++j) terms.push_back({sv.slot_to_var[cat.slot(q, j)], 1.0});
    lp.add_constraint(std::move(terms), RowSense::Eq, demand);
  }
  std::vector<double> ones(cat.slot_count(), 1.0);
  std::vector<double> zero_bg(static_cast<std::size_t>(t.edge_count()), 0.0);
  add_edge_rows_vs_alpha(t, cat, lp, sv, alpha_out, ones, zero_bg);
  return {std::move(lp), std::move(sv)};
}

}  // namespace detail

// Debug dump of the flow-MLU LP (the CLI's --emit-lp).
inline std::string dump_mlu_flow_lp(const Topology& t, const PathCatalog& cat,
                                    const DemandMatrix& d) {
  int alpha = 0;
  auto [lp, sv] = detail::build_mlu_flow_lp(t, cat, d, alpha);
  return lp.dump();
}

inline SolveResult lp_mlu_flows(const Topology& t, const PathCatalog& cat, const DemandMatrix& d) {
  int alpha = 0;
  auto [lp, sv] = detail::build_mlu_flow_lp(t, cat, d, alpha);

  SolveResult res;
  res.allocation.mode = Allocation::Mode::PlannedFlows;
  res.allocation.values.assign(cat.slot_count(), 0.0);
  if (sv.var_to_slot.empty()) {
    res.objective = 0.0;  // no demand
    return res;
  }
  LpSolution sol = solve_lp(lp);
  detail::require_optimal(sol, "lp_mlu_flows");
  for (std::size_t i = 0; i < sv.var_to_slot.size(); ++i)
    res.allocation.values[sv.var_to_slot[i]] = std::max(sol.value(static_cast<int>(i)), 0.0);
  res.objective = sol.value(alpha);
  res.iterations = sol.iterations;
  return res;
}

// LP-w: same objective over per-pair split weights (summing to 1).
inline SolveResult lp_weights_mlu(const Topology& t, const PathCatalog& cat,
                                  const DemandMatrix& d) {
  LpProblem lp(false);
  auto sv = detail::make_slot_vars(cat, lp, "w", [&](std::size_t q) {
    return d(cat.pair(q).first, cat.pair(q).second) > 0.0;
  });
  int alpha = lp.add_var("mlu", 1.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    if (d(cat.pair(q).first, cat.pair(q).second) <= 0.0) continue;
    std::vector<std::pair<int, double>> terms;
    for (int j = 0; j < cat.k(); ++j) terms.push_back({sv.slot_to_var[cat.slot(q, j)], 1.0});
    lp.add_constraint(std::move(terms), RowSense::Eq, 1.0);
  }
  std::vector<double> demand_coeff(cat.slot_count(), 0.0);
  for (std::size_t slot = 0; slot < cat.slot_count(); ++slot) {
    std::size_t q = cat.pair_of_slot(slot);
    demand_coeff[slot] = d(cat.pair(q).first, cat.pair(q).second);
  }
  std::vector<double> zero_bg(static_cast<std::size_t>(t.edge_count()), 0.0);
  detail::add_edge_rows_vs_alpha(t, cat, lp, sv, alpha, demand_coeff, zero_bg);

  SolveResult res;
  res.allocation = Allocation::uniform_weights(cat);  // zero-demand pairs stay uniform
  if (sv.var_to_slot.empty()) {
    res.objective = 0.0;
    return res;
  }
  LpSolution sol = solve_lp(lp);
  detail::require_optimal(sol, "lp_weights_mlu");
  for (std::size_t i = 0; i < sv.var_to_slot.size(); ++i)
    res.allocation.values[sv.var_to_slot[i]] = std::max(sol.value(static_cast<int>(i)), 0.0);
  res.objective = sol.value(alpha);
  res.iterations = sol.iterations;
  return res;
}

// Expected-MLU optimum over weights shared across scenarios: one alpha per
// scenario, objective sum prob_i * alpha_i.  Exact reference for the
// first-order solvers on the expected objective.
inline SolveResult lp_expected_mlu_weights(const Topology& t, const PathCatalog& cat,
                                           const std::vector<Scenario>& scenarios) {
  if (scenarios.empty()) throw ValidationError("lp_expected_mlu_weights: no scenarios");
  auto pair_active = [&](std::size_t q) {
    for (const Scenario& s : scenarios)
      if (s.demand(cat.pair(q).first, cat.pair(q).second) > 0.0) return true;
    return false;
  };
  LpProblem lp(false);
  auto sv = detail::make_slot_vars(cat, lp, "w", pair_active);
  std::vector<int> alphas;
  for (std::size_t i = 0; i < scenarios.size(); ++i)
    alphas.push_back(lp.add_var("mlu[" + std::to_string(i) + "]", scenarios[i].prob));
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    if (!pair_active(q)) continue;
    std::vector<std::pair<int, double>> terms;
    for (int j = 0; j < cat.k(); ++j) terms.push_back({sv.slot_to_var[cat.slot(q, j)], 1.0});
    lp.add_constraint(std::move(terms), RowSense::Eq, 1.0);
  }
  std::vector<double> zero_bg(static_cast<std::size_t>(t.edge_count()), 0.0);
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    std::vector<double> coeff(cat.slot_count(), 0.0);
    for (std::size_t slot = 0; slot < cat.slot_count(); ++slot) {
      std::size_t q = cat.pair_of_slot(slot);
      coeff[slot] = scenarios[i].demand(cat.pair(q).first, cat.pair(q).second);
    }
    detail::add_edge_rows_vs_alpha(t, cat, lp, sv, alphas[i], coeff, zero_bg);
  }
  SolveResult res;
  res.allocation = Allocation::uniform_weights(cat);
  if (sv.var_to_slot.empty()) {
    res.objective = 0.0;
    return res;
  }
  LpSolution sol = solve_lp(lp);
  detail::require_optimal(sol, "lp_expected_mlu_weights");
  for (std::size_t i = 0; i < sv.var_to_slot.size(); ++i)
    res.allocation.values[sv.var_to_slot[i]] = std::max(sol.value(static_cast<int>(i)), 0.0);
  res.objective = sol.objective;
  res.iterations = sol.iterations;
  return res;
}

// ---------------------------------------------------------------------------
// MTF / MCF flow LPs (flows bounded by demand and capacity).
// ---------------------------------------------------------------------------

inline SolveResult lp_mtf(const Topology& t, const PathCatalog& cat, const DemandMatrix& d) {
  LpProblem lp(true);
  auto sv = detail::make_slot_vars(cat, lp, "f", [&](std::size_t q) {
    return d(cat.pair(q).first, cat.pair(q).second) > 0.0;
  });
  for (int v = 0; v < lp.var_count(); ++v) lp.set_objective_coeff(v, 1.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    if (demand <= 0.0) continue;
    std::vector<std::pair<int, double>> terms;
    for (int j = 0; j < cat.k(); ++j) terms.push_back({sv.slot_to_var[cat.slot(q, j)], 1.0});
    lp.add_constraint(std::move(terms), RowSense::Le, demand);
  }
  for (int e = 0; e < t.edge_count(); ++e) {
    std::vector<std::pair<int, double>> terms;
    for (std::size_t slot : cat.edge_slots(e)) {
      int var = sv.slot_to_var[slot];
      if (var >= 0) terms.push_back({var, 1.0});
    }
    if (!terms.empty()) lp.add_constraint(std::move(terms), RowSense::Le, t.capacity(e));
  }
  SolveResult res;
  res.allocation = Allocation::zero_flows(cat);
  if (sv.var_to_slot.empty()) {
    res.objective = 0.0;
    return res;
  }
  LpSolution sol = solve_lp(lp);
  detail::require_optimal(sol, "lp_mtf");
  for (std::size_t i = 0; i < sv.var_to_slot.size(); ++i)
    res.allocation.values[sv.var_to_slot[i]] = std::max(sol.value(static_cast<int>(i)), 0.0);
  res.objective = sol.objective;
  res.iterations = sol.iterations;
  return res;
}

inline SolveResult lp_mcf(const Topology& t, const PathCatalog& cat, const DemandMatrix& d) {
  LpProblem lp(true);
  auto sv = detail::make_slot_vars(cat, lp, "f", [&](std::size_t q) {
    return d(cat.pair(q).first, cat.pair(q).second) > 0.0;
  });
  SolveResult res;
  res.allocation = Allocation::zero_flows(cat);
  if (sv.var_to_slot.empty()) {
    res.objective = 1.0;  // no positive demand: every pair is trivially satisfied
    return res;
  }
  int alpha = lp.add_var("alpha", 1.0);
  lp.add_constraint({{alpha, 1.0}}, RowSense::Le, 1.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    if (demand <= 0.0) continue;
    std::vector<std::pair<int, double>> ge_terms, le_terms;
    for (int j = 0; j < cat.k(); ++j) {
      ge_terms.push_back({sv.slot_to_var[cat.slot(q, j)], 1.0});
      le_terms.push_back({sv.slot_to_var[cat.slot(q, j)], 1.0});
    }
    ge_terms.push_back({alpha, -demand});
    lp.add_constraint(std::move(ge_terms), RowSense::Ge, 0.0);
    lp.add_constraint(std::move(le_terms), RowSense::Le, demand);
  }
  for (int e = 0; e < t.edge_count(); ++e) {
    std::vector<std::pair<int, double>> terms;
    for (std::size_t slot : cat.edge_slots(e)) {
      int var = sv.slot_to_var[slot];
      if (var >= 0) terms.push_back({var, 1.0});
    }
    if (!terms.empty()) lp.add_constraint(std::move(terms), RowSense::Le, t.capacity(e));
  }
  LpSolution sol = solve_lp(lp);
  detail::require_optimal(sol, "lp_mcf");
  for (std::size_t i = 0; i < sv.var_to_slot.size(); ++i)
    res.allocation.values[sv.var_to_slot[i]] = std::max(sol.value(static_cast<int>(i)), 0.0);
  res.objective = sol.value(alpha);
  res.iterations = sol.iterations;
  return res;
}

// ---------------------------------------------------------------------------
// Grid oracle: exhaustive expected-objective evaluation over the per-pair
// weight simplex grid on tiny instances.  For the flow objectives the grid
// point (split weights) is realized as planned flows D * r per scenario.
// Optional refinement passes re-grid a shrinking window around the incumbent
// at 10x resolution each; sound for the convex / plateau surfaces it is used
// on in the tests.
// ---------------------------------------------------------------------------

struct GridOracleResult {
  double value = 0.0;
  std::vector<double> weights;  // full slot vector
};

inline GridOracleResult grid_oracle(const Topology& t, const PathCatalog& cat,
                                    const std::vector<Scenario>& scenarios, Objective objective,
                                    double step, int refine_passes = 0) {
  if (scenarios.empty()) throw ValidationError("grid_oracle: no scenarios");
  if (!(step > 0.0 && step <= 1.0)) throw ValidationError("grid_oracle: step must be in (0,1]");

  // Pairs carrying demand in some scenario; everything else is fixed uniform.
  std::vector<std::size_t> active;
  int free_dims = 0;
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    bool has_demand = false;
    for (const Scenario& s : scenarios)
      if (s.demand(cat.pair(q).first, cat.pair(q).second) > 0.0) has_demand = true;
    if (!has_demand) continue;
    active.push_back(q);
    free_dims += cat.distinct_paths(q) - 1;
  }
  if (free_dims > 4)
    throw ValidationError("grid_oracle: " + std::to_string(free_dims) +
                          " free weight dimensions exceed the tiny-instance guard (4)");

  // dims[i] = (pair position in `active`, distinct-path index).
  std::vector<std::pair<std::size_t, int>> dims;
  for (std::size_t a = 0; a < active.size(); ++a)
    for (int j = 0; j + 1 < cat.distinct_paths(active[a]); ++j) dims.push_back({a, j});

  const bool minimize = objective == Objective::Mlu;
  std::vector<double> scratch_load(static_cast<std::size_t>(t.edge_count()));

  // Evaluate the expected objective for free-dim values v (last distinct path
  // of each pair takes the remaining mass).
  std::vector<double> pair_weights(active.size() * 8, 0.0);  // distinct <= k, k small
  auto evaluate = [&](const std::vector<double>& v) -> double {
    for (std::size_t a = 0; a < active.size(); ++a) {
      int kd = cat.distinct_paths(active[a]);
      double rest = 1.0;
      for (std::size_t i = 0; i < dims.size(); ++i) {
        if (dims[i].first != a) continue;
        pair_weights[a * 8 + static_cast<std::size_t>(dims[i].second)] = v[i];
        rest -= v[i];
      }
      if (rest < -1e-12) return minimize ? std::numeric_limits<double>::infinity()
                                         : -std::numeric_limits<double>::infinity();
      pair_weights[a * 8 + static_cast<std::size_t>(kd) - 1] = std::max(rest, 0.0);
    }
    double expected = 0.0;
    for (const Scenario& sc : scenarios) {
      std::fill(scratch_load.begin(), scratch_load.end(), 0.0);
      double delivered_total = 0.0;
      double min_ratio = std::numeric_limits<double>::infinity();
      if (objective == Objective::Mlu) {
        for (std::size_t a = 0; a < active.size(); ++a) {
          std::size_t q = active[a];
          double demand = sc.demand(cat.pair(q).first, cat.pair(q).second);
          if (demand == 0.0) continue;
          for (int j = 0; j < cat.distinct_paths(q); ++j) {
            double w = pair_weights[a * 8 + static_cast<std::size_t>(j)];
            if (w == 0.0) continue;
            for (int e : cat.slot_edges(cat.slot(q, j)))
              scratch_load[static_cast<std::size_t>(e)] += demand * w;
          }
        }
        double mlu = 0.0;
        for (int e = 0; e < t.edge_count(); ++e)
          mlu = std::max(mlu, scratch_load[static_cast<std::size_t>(e)] / t.capacity(e));
        expected += sc.prob * mlu;
      } else {
        for (std::size_t a = 0; a < active.size(); ++a) {
          std::size_t q = active[a];
          double demand = sc.demand(cat.pair(q).first, cat.pair(q).second);
          if (demand == 0.0) continue;
          for (int j = 0; j < cat.distinct_paths(q); ++j) {
            double x = demand * pair_weights[a * 8 + static_cast<std::size_t>(j)];
            if (x == 0.0) continue;
            for (int e : cat.slot_edges(cat.slot(q, j)))
              scratch_load[static_cast<std::size_t>(e)] += x;
          }
        }
        double gamma = 1.0;
        for (int e = 0; e < t.edge_count(); ++e)
          gamma = std::max(gamma, scratch_load[static_cast<std::size_t>(e)] / t.capacity(e));
        bool any = false;
        for (std::size_t a = 0; a < active.size(); ++a) {
          std::size_t q = active[a];
          double demand = sc.demand(cat.pair(q).first, cat.pair(q).second);
          if (demand == 0.0) continue;
          any = true;
          double sum = 0.0;
          for (int j = 0; j < cat.distinct_paths(q); ++j)
            sum += demand * pair_weights[a * 8 + static_cast<std::size_t>(j)];
          double delivered = std::min(sum / gamma, demand);
          delivered_total += delivered;
          min_ratio = std::min(min_ratio, delivered / demand);
        }
        expected += sc.prob * (objective == Objective::Mtf ? delivered_total
                                                           : (any ? min_ratio : 1.0));
      }
    }
    return expected;
  };

  std::vector<double> lo(dims.size(), 0.0), hi(dims.size(), 1.0);
  std::vector<double> best_v(dims.size(), 0.0);
  double best = minimize ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
  double cur_step = step;
  for (int pass = 0; pass <= refine_passes; ++pass) {
    std::vector<std::size_t> counts(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i)
      counts[i] = static_cast<std::size_t>(std::floor((hi[i] - lo[i]) / cur_step + 1e-9)) + 1;
    std::vector<std::size_t> odo(dims.size(), 0);
    std::vector<double> v(dims.size(), 0.0);
    while (true) {
      for (std::size_t i = 0; i < dims.size(); ++i)
        v[i] = std::min(lo[i] + static_cast<double>(odo[i]) * cur_step, 1.0);
      double value = evaluate(v);
      if ((minimize && value < best) || (!minimize && value > best)) {
        best = value;
        best_v = v;
      }
      if (dims.empty()) break;
      std::size_t i = 0;
      while (i < dims.size()) {
        if (++odo[i] < counts[i]) break;
        odo[i] = 0;
        ++i;
      }
      if (i == dims.size()) break;
    }
    if (pass < refine_passes) {
      for (std::size_t i = 0; i < dims.size(); ++i) {
        lo[i] = std::max(0.0, best_v[i] - cur_step);
        hi[i] = std::min(1.0, best_v[i] + cur_step);
      }
      cur_step /= 10.0;
    }
  }

  GridOracleResult res;
  res.value = best;
  res.weights = Allocation::uniform_weights(cat).values;
  // Materialize the incumbent into full slot weights (duplicate-padding slots
  // get zero; the whole mass of a physical path sits on its first slot).
  for (std::size_t a = 0; a < active.size(); ++a) {
    std::size_t q = active[a];
    int kd = cat.distinct_paths(q);
    double rest = 1.0;
    std::vector<double> w(static_cast<std::size_t>(kd), 0.0);
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i].first != a) continue;
      w[static_cast<std::size_t>(dims[i].second)] = best_v[i];
      rest -= best_v[i];
    }
    w[static_cast<std::size_t>(kd) - 1] = std::max(rest, 0.0);
    for (int j = 0; j < cat.k(); ++j)
      res.weights[cat.slot(q, j)] = j < kd ? w[static_cast<std::size_t>(j)] : 0.0;
  }
  return res;
}

// ---------------------------------------------------------------------------
// LP-top: solve the LP for the largest demands only; the rest ride their
// first candidate path as fixed background load.
// ---------------------------------------------------------------------------

struct LpTopResult {
  Allocation allocation;  // planned flows, background included
  double objective = 0.0;
  int clamped_edges = 0;  // edges whose residual capacity hit zero (MTF/MCF)
};

inline LpTopResult lp_top(const Topology& t, const PathCatalog& cat, const DemandMatrix& d,
                          Objective objective, double top_fraction = 0.1) {
  if (!(top_fraction >= 0.0 && top_fraction <= 1.0))
    throw ValidationError("lp_top: top fraction must be in [0,1]");
  std::vector<std::size_t> positive;
  for (std::size_t q = 0; q < cat.pair_count(); ++q)
    if (d(cat.pair(q).first, cat.pair(q).second) > 0.0) positive.push_back(q);
  std::sort(positive.begin(), positive.end(), [&](std::size_t a, std::size_t b) {
    double da = d(cat.pair(a).first, cat.pair(a).second);
    double db = d(cat.pair(b).first, cat.pair(b).second);
    if (da != db) return da > db;
    return cat.pair(a) < cat.pair(b);
  });
  std::size_t top_count = static_cast<std::size_t>(
      std::ceil(top_fraction * static_cast<double>(positive.size()) - 1e-12));
  top_count = std::min(top_count, positive.size());
  std::vector<char> is_top(cat.pair_count(), 0);
  for (std::size_t i = 0; i < top_count; ++i) is_top[positive[i]] = 1;

  // Background: remaining demands pinned to their first candidate path.
  std::vector<double> bg_flows(cat.slot_count(), 0.0);
  std::vector<double> bg_load(static_cast<std::size_t>(t.edge_count()), 0.0);
  for (std::size_t q : positive) {
    if (is_top[q]) continue;
    double demand = d(cat.pair(q).first, cat.pair(q).second);
    std::size_t slot = cat.slot(q, 0);
    bg_flows[slot] = demand;
    for (int e : cat.slot_edges(slot)) bg_load[static_cast<std::size_t>(e)] += demand;
  }

  LpTopResult res;
  res.allocation.mode = Allocation::Mode::PlannedFlows;
  res.allocation.values = bg_flows;

  DemandMatrix top_demand(d.node_count());
  for (std::size_t q : positive)
    if (is_top[q])
      top_demand.set(cat.pair(q).first, cat.pair(q).second,
                     d(cat.pair(q).first, cat.pair(q).second));

  if (top_count > 0) {
    if (objective == Objective::Mlu) {
      LpProblem lp(false);
      auto sv = detail::make_slot_vars(cat, lp, "f", [&](std::size_t q) { return is_top[q] != 0; });
      int alpha = lp.add_var("mlu", 1.0);
      for (std::size_t q = 0; q < cat.pair_count(); ++q) {
        if (!is_top[q]) continue;
        std::vector<std::pair<int, double>> terms;
        for (int j = 0; j < cat.k(); ++j) terms.push_back({sv.slot_to_var[cat.slot(q, j)], 1.0});
        lp.add_constraint(std::move(terms), RowSense::Eq,
                          d(cat.pair(q).first, cat.pair(q).second));
      }
      std::vector<double> ones(cat.slot_count(), 1.0);
      detail::add_edge_rows_vs_alpha(t, cat, lp, sv, alpha, ones, bg_load);
      LpSolution sol = solve_lp(lp);
      detail::require_optimal(sol, "lp_top");
      for (std::size_t i = 0; i < sv.var_to_slot.size(); ++i)
        res.allocation.values[sv.var_to_slot[i]] += std::max(sol.value(static_cast<int>(i)), 0.0);
    } else {
      // Residual capacities after background; negative residuals clamp to 0.
      Topology residual = [&]() {
        std::vector<Edge> edges = t.edges();
        std::vector<double> caps = t.capacities();
        for (int e = 0; e < t.edge_count(); ++e) {
          double r = caps[static_cast<std::size_t>(e)] - bg_load[static_cast<std::size_t>(e)];
          if (r < 0.0) {
            ++res.clamped_edges;
            r = 0.0;
          }
          // Topology wants positive capacities; an epsilon floor keeps
          // exhausted edges in the graph while pinning their LP rows to ~0.
          caps[static_cast<std::size_t>(e)] = std::max(r, 1e-15);
        }
        return Topology(t.node_count(), std::move(edges), std::move(caps));
      }();
      SolveResult sub = objective == Objective::Mtf ? lp_mtf(residual, cat, top_demand)
                                                    : lp_mcf(residual, cat, top_demand);
      for (std::size_t slot = 0; slot < cat.slot_count(); ++slot)
        res.allocation.values[slot] += sub.allocation.values[slot];
    }
  }

  // Report the merged allocation's objective on the real topology.
  if (objective == Objective::Mlu) {
    std::vector<double> load = edge_loads_from_flows(res.allocation.values, cat, t);
    double mlu = 0.0;
    for (int e = 0; e < t.edge_count(); ++e)
      mlu = std::max(mlu, load[static_cast<std::size_t>(e)] / t.capacity(e));
    res.objective = mlu;
  } else {
    FlowMetrics m = eval_mtf_mcf(res.allocation, d, cat, t);
    res.objective = objective == Objective::Mtf ? m.mtf : m.mcf;
  }
  return res;
}

// ---------------------------------------------------------------------------
// POP: k replicas with capacities c/k; each positive-demand pair is assigned
// to exactly one replica uniformly at random; replicas solve independently in
// parallel and merge by summing flows.
// ---------------------------------------------------------------------------

struct PopResult {
  Allocation allocation;
  double objective = 0.0;
  std::vector<double> replica_objectives;
};

inline PopResult pop_solve(const Topology& t, const PathCatalog& cat, const DemandMatrix& d,
                           int replicas, Objective objective, std::uint64_t seed) {
  if (replicas < 1) throw ValidationError("pop_solve: replica count must be >= 1");
  std::vector<double> caps = t.capacities();
  for (double& c : caps) c /= static_cast<double>(replicas);
  Topology replica_topo(t.node_count(), t.edges(), std::move(caps));

  std::vector<DemandMatrix> replica_demand(static_cast<std::size_t>(replicas),
                                           DemandMatrix(d.node_count()));
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    auto [s, dst] = cat.pair(q);
    double demand = d(s, dst);
    if (demand <= 0.0) continue;
    auto rng = substream(seed, 0x706f70ULL, static_cast<std::uint64_t>(s),
                         static_cast<std::uint64_t>(dst));
    std::uniform_int_distribution<int> pick(0, replicas - 1);
    replica_demand[static_cast<std::size_t>(pick(rng))].set(s, dst, demand);
  }

  std::vector<SolveResult> sub(static_cast<std::size_t>(replicas));
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t r) {
    switch (objective) {
      case Objective::Mlu: sub[r] = lp_mlu_flows(replica_topo, cat, replica_demand[r]); break;
      case Objective::Mtf: sub[r] = lp_mtf(replica_topo, cat, replica_demand[r]); break;
      case Objective::Mcf: sub[r] = lp_mcf(replica_topo, cat, replica_demand[r]); break;
    }
  });

  PopResult res;
  res.allocation = Allocation::zero_flows(cat);
  for (int r = 0; r < replicas; ++r) {
    res.replica_objectives.push_back(sub[static_cast<std::size_t>(r)].objective);
    for (std::size_t slot = 0; slot < cat.slot_count(); ++slot)
      res.allocation.values[slot] += sub[static_cast<std::size_t>(r)].allocation.values[slot];
  }
  if (objective == Objective::Mlu) {
    std::vector<double> load = edge_loads_from_flows(res.allocation.values, cat, t);
    double mlu = 0.0;
    for (int e = 0; e < t.edge_count(); ++e)
      mlu = std::max(mlu, load[static_cast<std::size_t>(e)] / t.capacity(e));
    res.objective = mlu;
  } else {
    FlowMetrics m = eval_mtf_mcf(res.allocation, d, cat, t);
    res.objective = objective == Objective::Mtf ? m.mtf : m.mcf;
  }
  return res;
}

// Converts planned flows to per-pair split weights; pairs with zero flow mass
// fall back to uniform.
inline Allocation flows_to_weights(const Allocation& flows, const PathCatalog& cat) {
  if (flows.mode != Allocation::Mode::PlannedFlows)
    throw ValidationError("flows_to_weights: expected planned flows");
  Allocation w;
  w.mode = Allocation::Mode::Weights;
  w.values.assign(cat.slot_count(), 0.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double sum = 0.0;
    for (int j = 0; j < cat.k(); ++j) sum += flows.values[cat.slot(q, j)];
    for (int j = 0; j < cat.k(); ++j)
      w.values[cat.slot(q, j)] =
          sum > 0.0 ? flows.values[cat.slot(q, j)] / sum : 1.0 / static_cast<double>(cat.k());
  }
  return w;
}

}  // namespace mcf
