#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcf/common.hpp"
#include "mcf/demand.hpp"
#include "mcf/gd.hpp"
#include "mcf/lp_solvers.hpp"
#include "mcf/objectives.hpp"
#include "mcf/path_catalog.hpp"
#include "mcf/policy.hpp"
#include "mcf/topology.hpp"

#include <json.hpp>

namespace mcf {

enum class Method { LpF, LpW, LpTop, Pop, Gd, Pram, DrlMono };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::LpF: return "lp-f";
    case Method::LpW: return "lp-w";
    case Method::LpTop: return "lp-top";
    case Method::Pop: return "pop";
    case Method::Gd: return "gd";
    case Method::Pram: return "pram";
    case Method::DrlMono: return "drl-mono";
  }
  return "?";
}

// Accepts "lp-f" and the predictor variant "lp-f-pred".
inline std::pair<Method, bool> parse_method(std::string name) {
  bool predicted = false;
  const std::string suffix = "-pred";
  if (name.size() > suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
    predicted = true;
    name.resize(name.size() - suffix.size());
  }
  for (Method m : {Method::LpF, Method::LpW, Method::LpTop, Method::Pop, Method::Gd, Method::Pram,
                   Method::DrlMono}) {
    if (name == method_name(m)) return {m, predicted};
  }
  throw ValidationError("unknown method: " + name);
}

inline Objective parse_objective(const std::string& name) {
  for (Objective o : {Objective::Mlu, Objective::Mtf, Objective::Mcf})
    if (name == objective_name(o)) return o;
  throw ValidationError("unknown objective: " + name);
}

inline Predictor parse_predictor(const std::string& name) {
  for (Predictor p : {Predictor::MovingAverage, Predictor::MeanValue, Predictor::SeasonalNaive,
                      Predictor::LinearTrend})
    if (name == predictor_name(p)) return p;
  throw ValidationError("unknown predictor: " + name);
}

struct ScenarioSpec {
  int failures = 0;
  double fluctuation_alpha = 0.0;
};

struct ExperimentConfig {
  std::string topology_path;
  std::string demand_path;
  Objective objective = Objective::Mlu;
  Method method = Method::LpF;
  bool predicted = false;
  Predictor predictor = Predictor::MovingAverage;
  std::uint64_t seed = 1;
  ScenarioSpec scenario;
  std::string output_dir = ".";
  std::string model_path;

  int k_paths = 4;
  int window = 12;
  int pop_replicas = 2;
  double top_fraction = 0.1;
  int gd_iterations = 2000;
  double gd_eta = 0.0;  // 0: pick automatically
  // trainer knobs (train subcommand)
  TrainHyper hyper;

  void validate() const {
    if (method == Method::LpW && objective != Objective::Mlu)
      throw ValidationError("config: method lp-w is only defined for objective mlu");
    if (scenario.failures < 0) throw ValidationError("config: failures must be >= 0");
    if (scenario.fluctuation_alpha < 0.0) throw ValidationError("config: alpha must be >= 0");
    if (k_paths < 1) throw ValidationError("config: k must be >= 1");
    if (window < 1) throw ValidationError("config: window must be >= 1");
    if (pop_replicas < 1) throw ValidationError("config: pop replicas must be >= 1");
    if (!(top_fraction >= 0.0 && top_fraction <= 1.0))
      throw ValidationError("config: top fraction must be in [0,1]");
  }
};

// The digest pins the experiment context shared by comparable runs (method
// and predictor intentionally excluded so `report` can line methods up).
inline std::uint64_t config_digest(const ExperimentConfig& c) {
  std::string s;
  s += "topology=" + c.topology_path;
  s += ";demands=" + c.demand_path;
  s += ";objective=" + std::string(objective_name(c.objective));
  s += ";seed=" + std::to_string(c.seed);
  s += ";k=" + std::to_string(c.k_paths);
  s += ";window=" + std::to_string(c.window);
  s += ";failures=" + std::to_string(c.scenario.failures);
  s += ";alpha=" + format_double(c.scenario.fluctuation_alpha);
  s += ";split=7:1:2";
  return fnv1a(s);
}

// 7:1:2 train/validation/test split boundaries.
struct SeriesSplit {
  std::size_t train_end = 0;  // [0, train_end)
  std::size_t val_end = 0;    // [train_end, val_end)
  std::size_t size = 0;       // test = [val_end, size)
};

inline SeriesSplit split_series(std::size_t n) {
  SeriesSplit s;
  s.size = n;
  s.train_end = (n * 7) / 10;
  s.val_end = (n * 8) / 10;
  return s;
}

// ---------------------------------------------------------------------------
// Scenario application.
// ---------------------------------------------------------------------------

inline std::set<int> sample_failures(const Topology& t, int count, std::uint64_t seed,
                                     std::uint64_t timestep) {
  if (count > t.edge_count())
    throw ValidationError("scenario: cannot fail " + std::to_string(count) + " of " +
                          std::to_string(t.edge_count()) + " edges");
  std::vector<int> ids(static_cast<std::size_t>(t.edge_count()));
  std::iota(ids.begin(), ids.end(), 0);
  auto rng = substream(seed, 0x6661696cULL, timestep);
  std::shuffle(ids.begin(), ids.end(), rng);
  return std::set<int>(ids.begin(), ids.begin() + count);
}

// The failed instance: failed edges removed, catalog paths through them
// dropped, pairs with no surviving path excluded.  Node ids are preserved.
struct FailedView {
  Topology topo;
  PathCatalog cat;
  std::vector<std::size_t> pair_map;  // original pair index -> view pair index or npos
};

inline FailedView make_failed_view(const Topology& t, const PathCatalog& cat,
                                   const std::set<int>& failed) {
  Topology reduced = zero_capacities(t, failed);
  std::vector<std::pair<int, int>> pairs;
  std::vector<Path> paths;
  std::vector<int> distinct;
  std::vector<std::size_t> pair_map(cat.pair_count(), PathCatalog::npos);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    std::vector<Path> alive;
    for (int j = 0; j < cat.distinct_paths(q); ++j) {
      std::size_t slot = cat.slot(q, j);
      bool dead = false;
      for (int e : cat.slot_edges(slot))
        if (failed.count(e)) dead = true;
      if (!dead) alive.push_back(cat.path(slot));
    }
    if (alive.empty()) continue;
    pair_map[q] = pairs.size();
    pairs.push_back(cat.pair(q));
    distinct.push_back(static_cast<int>(alive.size()));
    for (int j = 0; j < cat.k(); ++j)
      paths.push_back(alive[std::min<std::size_t>(static_cast<std::size_t>(j), alive.size() - 1)]);
  }
  PathCatalog view_cat(reduced, cat.k(), std::move(pairs), std::move(paths), std::move(distinct));
  return FailedView{std::move(reduced), std::move(view_cat), std::move(pair_map)};
}

// Carries a weights allocation into the failed view: weights are first zeroed
// on dead paths and renormalized, then surviving distinct paths keep their
// mass (padding duplicates in the view get zero).
inline Allocation map_weights_to_view(const Allocation& rescaled, const PathCatalog& cat,
                                      const FailedView& view) {
  Allocation out;
  out.mode = Allocation::Mode::Weights;
  out.values.assign(view.cat.slot_count(), 0.0);
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    std::size_t vq = view.pair_map[q];
    if (vq == PathCatalog::npos) continue;
    for (int j = 0; j < cat.distinct_paths(q); ++j) {
      double w = rescaled.values[cat.slot(q, j)];
      if (w == 0.0) continue;
      const Path& p = cat.path(cat.slot(q, j));
      for (int vj = 0; vj < view.cat.distinct_paths(vq); ++vj) {
        if (view.cat.path(view.cat.slot(vq, vj)) == p) {
          out.values[view.cat.slot(vq, vj)] += w;
          break;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-timestep solves.
// ---------------------------------------------------------------------------

struct StepOutcome {
  double raw = 0.0;         // objective on the ground truth
  double oracle = 0.0;      // LP optimum on the ground truth
  double normalized = 1.0;  // raw / oracle (1 when the oracle is 0)
  double solve_seconds = 0.0;
  int disconnected_pairs = 0;
  double lost_demand = 0.0;
};

namespace detail {

inline double oracle_value(const Topology& t, const PathCatalog& cat, const DemandMatrix& truth,
                           Objective objective) {
  switch (objective) {
    case Objective::Mlu: return lp_mlu_flows(t, cat, truth).objective;
    case Objective::Mtf: return lp_mtf(t, cat, truth).objective;
    case Objective::Mcf: return lp_mcf(t, cat, truth).objective;
  }
  return 0.0;
}

inline double evaluate_allocation(const Topology& t, const PathCatalog& cat,
                                  const DemandMatrix& truth, Objective objective,
                                  const Allocation& alloc) {
  if (objective == Objective::Mlu) {
    Allocation w = alloc.mode == Allocation::Mode::Weights ? alloc : flows_to_weights(alloc, cat);
    return eval_mlu(w, truth, cat, t);
  }
  if (alloc.mode != Allocation::Mode::PlannedFlows)
    throw ValidationError("evaluate_allocation: flow objectives expect planned flows");
  FlowMetrics m = eval_mtf_mcf(alloc, truth, cat, t);
  return objective == Objective::Mtf ? m.mtf : m.mcf;
}

}  // namespace detail

// Solver-method allocation for one demand matrix (no policies here).
inline Allocation solve_allocation(const ExperimentConfig& cfg, const Topology& t,
                                   const PathCatalog& cat, const DemandMatrix& input,
                                   std::uint64_t step_seed) {
  switch (cfg.method) {
    case Method::LpF:
      switch (cfg.objective) {
        case Objective::Mlu: return lp_mlu_flows(t, cat, input).allocation;
        case Objective::Mtf: return lp_mtf(t, cat, input).allocation;
        case Objective::Mcf: return lp_mcf(t, cat, input).allocation;
      }
      break;
    case Method::LpW:
      return lp_weights_mlu(t, cat, input).allocation;
    case Method::LpTop:
      return lp_top(t, cat, input, cfg.objective, cfg.top_fraction).allocation;
    case Method::Pop:
      return pop_solve(t, cat, input, cfg.pop_replicas, cfg.objective, step_seed).allocation;
    case Method::Gd: {
      GdConfig gd;
      gd.iterations = cfg.gd_iterations;
      auto scenarios = single_scenario(input);
      if (cfg.objective == Objective::Mlu) {
        double rho = gd_mlu_subgradient_bound(t, cat, scenarios);
        gd.eta = cfg.gd_eta > 0.0 ? cfg.gd_eta
                                  : gd_theory_step(gd_norm_bound(cat), rho, gd.iterations);
        gd.averaging = true;
        return gd_minimize_mlu(t, cat, scenarios, gd, Allocation::uniform_weights(cat)).allocation;
      }
      gd.eta = cfg.gd_eta > 0.0 ? cfg.gd_eta
                                : std::max(input.total(), 1e-6) / std::sqrt(static_cast<double>(
                                      std::max<std::size_t>(cat.slot_count(), 1)));
      gd.schedule = GdConfig::Schedule::InvSqrt;
      return ga_maximize_flow(t, cat, scenarios, gd, Allocation::zero_flows(cat), cfg.objective)
          .allocation;
    }
    case Method::Pram:
    case Method::DrlMono:
      throw ValidationError("solve_allocation: policy methods need a trained model (use evaluate)");
  }
  throw ValidationError("solve_allocation: unhandled method");
}

// Evaluates one test timestep under the configured scenario.  `history` must
// end right before `truth`.
inline StepOutcome evaluate_step(const ExperimentConfig& cfg, const Topology& t,
                                 const PathCatalog& cat, const DemandSeries& history,
                                 const DemandMatrix& truth_in, std::uint64_t timestep,
                                 const PolicyParams* policy,
                                 std::vector<Subproblem>* policy_subs) {
  StepOutcome out;
  // Fluctuation perturbs the ground truth while models keep the clean history.
  DemandMatrix truth = truth_in;
  if (cfg.scenario.fluctuation_alpha > 0.0)
    truth = inject_fluctuation(truth_in, history, cfg.scenario.fluctuation_alpha,
                               mix_seed(cfg.seed, 0x74727574ULL, timestep));

  std::optional<std::set<int>> failed;
  if (cfg.scenario.failures > 0)
    failed = sample_failures(t, cfg.scenario.failures, cfg.seed, timestep);

  DemandMatrix input = truth;
  if (cfg.predicted || cfg.method == Method::Pram || cfg.method == Method::DrlMono) {
    // Policies and predictor variants only ever see history.
    if (cfg.predicted) input = predict(history, cfg.predictor);
  }

  auto t0 = std::chrono::steady_clock::now();
  Allocation alloc;
  if (cfg.method == Method::Pram || cfg.method == Method::DrlMono) {
    if (!policy || !policy_subs)
      throw ValidationError("evaluate_step: policy methods need a trained model");
    refresh_states(*policy_subs, cat, history, history.size());
    std::vector<std::vector<double>> actions(policy_subs->size());
    for (std::size_t i = 0; i < policy_subs->size(); ++i)
      actions[i] = active_means(*policy, (*policy_subs)[i]);
    alloc = decode_joint_action(*policy_subs, actions, cfg.objective, cat);
  } else if (failed) {
    // Baselines re-solve on the failed instance.
    FailedView view = make_failed_view(t, cat, *failed);
    ExperimentConfig sub = cfg;
    sub.scenario.failures = 0;
    Allocation view_alloc = solve_allocation(sub, view.topo, view.cat, input,
                                             mix_seed(cfg.seed, 0x736f6cULL, timestep));
    out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Score on the failed instance's ground truth.
    double raw = detail::evaluate_allocation(view.topo, view.cat, truth, cfg.objective, view_alloc);
    double oracle = detail::oracle_value(view.topo, view.cat, truth, cfg.objective);
    for (std::size_t q = 0; q < cat.pair_count(); ++q)
      if (view.pair_map[q] == PathCatalog::npos) {
        ++out.disconnected_pairs;
        out.lost_demand += truth(cat.pair(q).first, cat.pair(q).second);
      }
    out.raw = raw;
    out.oracle = oracle;
    out.normalized = oracle != 0.0 ? raw / oracle : 1.0;
    return out;
  } else {
    alloc = solve_allocation(cfg, t, cat, input, mix_seed(cfg.seed, 0x736f6cULL, timestep));
  }
  out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (failed) {
    // Policy path under failures: generic weight rescaling, then score on the
    // failed instance.
    FailedView view = make_failed_view(t, cat, *failed);
    if (cfg.objective == Objective::Mlu) {
      Allocation w = alloc.mode == Allocation::Mode::Weights ? alloc : flows_to_weights(alloc, cat);
      RescaleResult rs = rescale_on_failure(w, *failed, cat);
      Allocation mapped = map_weights_to_view(rs.allocation, cat, view);
      out.raw = detail::evaluate_allocation(view.topo, view.cat, truth, cfg.objective, mapped);
    } else {
      Allocation mapped;
      mapped.mode = Allocation::Mode::PlannedFlows;
      mapped.values.assign(view.cat.slot_count(), 0.0);
      for (std::size_t q = 0; q < cat.pair_count(); ++q) {
        std::size_t vq = view.pair_map[q];
        if (vq == PathCatalog::npos) continue;
        for (int j = 0; j < cat.distinct_paths(q); ++j) {
          const Path& p = cat.path(cat.slot(q, j));
          double f = alloc.values[cat.slot(q, j)];
          if (f == 0.0) continue;
          for (int vj = 0; vj < view.cat.distinct_paths(vq); ++vj)
            if (view.cat.path(view.cat.slot(vq, vj)) == p) {
              mapped.values[view.cat.slot(vq, vj)] += f;
              break;
            }
        }
      }
      out.raw = detail::evaluate_allocation(view.topo, view.cat, truth, cfg.objective, mapped);
    }
    out.oracle = detail::oracle_value(view.topo, view.cat, truth, cfg.objective);
    for (std::size_t q = 0; q < cat.pair_count(); ++q)
      if (view.pair_map[q] == PathCatalog::npos) {
        ++out.disconnected_pairs;
        out.lost_demand += truth(cat.pair(q).first, cat.pair(q).second);
      }
  } else {
    out.raw = detail::evaluate_allocation(t, cat, truth, cfg.objective, alloc);
    out.oracle = detail::oracle_value(t, cat, truth, cfg.objective);
  }
  out.normalized = out.oracle != 0.0 ? out.raw / out.oracle : 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Run records.
// ---------------------------------------------------------------------------

struct RunResult {
  ExperimentConfig config;
  std::uint64_t digest = 0;
  std::vector<StepOutcome> steps;

  double mean_raw() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.raw;
    return steps.empty() ? 0.0 : s / static_cast<double>(steps.size());
  }
  double mean_normalized() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.normalized;
    return steps.empty() ? 0.0 : s / static_cast<double>(steps.size());
  }
  double mean_seconds() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.solve_seconds;
    return steps.empty() ? 0.0 : s / static_cast<double>(steps.size());
  }
};

inline nlohmann::json run_to_json(const RunResult& r) {
  nlohmann::json j;
  j["digest"] = r.digest;
  j["topology"] = r.config.topology_path;
  j["demands"] = r.config.demand_path;
  j["objective"] = objective_name(r.config.objective);
  j["method"] = std::string(method_name(r.config.method)) + (r.config.predicted ? "-pred" : "");
  j["predictor"] = predictor_name(r.config.predictor);
  j["seed"] = r.config.seed;
  j["k"] = r.config.k_paths;
  j["window"] = r.config.window;
  j["scenario"] = {{"failures", r.config.scenario.failures},
                   {"fluctuation_alpha", r.config.scenario.fluctuation_alpha}};
  j["timesteps"] = r.steps.size();
  j["mean_raw"] = r.mean_raw();
  j["mean_normalized"] = r.mean_normalized();
  j["mean_solve_seconds"] = r.mean_seconds();
  return j;
}

inline void write_run_outputs(const RunResult& r, const std::string& dir,
                              const std::string& stem) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/" + stem + ".json");
    if (!out) throw ParseError("cannot write run summary in " + dir);
    out << run_to_json(r).dump(2) << "\n";
  }
  std::ofstream csv(dir + "/" + stem + ".csv");
  if (!csv) throw ParseError("cannot write run detail in " + dir);
  csv << "digest,timestep,raw,oracle,normalized,solve_seconds,disconnected_pairs,lost_demand\n";
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const StepOutcome& s = r.steps[i];
    csv << r.digest << "," << i << "," << format_double(s.raw) << "," << format_double(s.oracle)
        << "," << format_double(s.normalized) << "," << format_double(s.solve_seconds) << ","
        << s.disconnected_pairs << "," << format_double(s.lost_demand) << "\n";
  }
}

inline void write_trace_csv(const std::vector<TracePoint>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "iteration,objective,step_size\n";
  for (const TracePoint& p : trace)
    out << p.iteration << "," << format_double(p.objective) << "," << format_double(p.step)
        << "\n";
}

inline void write_learning_curve(const TrainResult& tr, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "epoch,train_objective,val_objective\n";
  for (std::size_t e = 0; e < tr.epoch_objective.size(); ++e) {
    out << e << "," << format_double(tr.epoch_objective[e]) << ",";
    if (e < tr.epoch_val.size()) out << format_double(tr.epoch_val[e]);
    out << "\n";
  }
}

}  // namespace mcf
