// Command-line benchmark harness: dataset generation, path precomputation,
// solver and trainer runs, scenario evaluation, and result aggregation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcf/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string topology;
  std::string demands;
  std::string paths;
  std::string objective = "mlu";
  std::string method = "lp-f";
  std::string predictor = "moving-average";
  std::string out_dir = "out";
  std::string model;
  std::uint64_t seed = 1;
  int k = 4;
  int window = 12;
  int pop_replicas = 2;
  double top_fraction = 0.1;
  int gd_iterations = 2000;
  double gd_eta = 0.0;
  int failures = 0;
  double alpha = 0.0;
  std::string emit_lp;
};

void add_instance_options(CLI::App* cmd, CommonArgs& a, bool needs_demands) {
  cmd->add_option("--topology", a.topology, "edge-list topology file")->required();
  auto* d = cmd->add_option("--demands", a.demands, "demand trace CSV");
  if (needs_demands) d->required();
  cmd->add_option("--paths", a.paths, "cached path catalog (built on the fly when absent)");
  cmd->add_option("--k", a.k, "candidate paths per pair")->capture_default_str();
  cmd->add_option("--window", a.window, "history window length")->capture_default_str();
  cmd->add_option("--seed", a.seed, "RNG seed")->capture_default_str();
}

mcf::Topology load_topo(const CommonArgs& a) { return mcf::load_topology(a.topology); }

mcf::PathCatalog load_or_build_catalog(const CommonArgs& a, const mcf::Topology& t) {
  if (!a.paths.empty()) return mcf::load_catalog(a.paths, t);
  return mcf::build_catalog(t, a.k);
}

mcf::ExperimentConfig make_config(const CommonArgs& a) {
  mcf::ExperimentConfig cfg;
  cfg.topology_path = a.topology;
  cfg.demand_path = a.demands;
  cfg.objective = mcf::parse_objective(a.objective);
  auto [method, predicted] = mcf::parse_method(a.method);
  cfg.method = method;
  cfg.predicted = predicted;
  cfg.predictor = mcf::parse_predictor(a.predictor);
  cfg.seed = a.seed;
  cfg.k_paths = a.k;
  cfg.window = a.window;
  cfg.pop_replicas = a.pop_replicas;
  cfg.top_fraction = a.top_fraction;
  cfg.gd_iterations = a.gd_iterations;
  cfg.gd_eta = a.gd_eta;
  cfg.scenario.failures = a.failures;
  cfg.scenario.fluctuation_alpha = a.alpha;
  cfg.output_dir = a.out_dir;
  cfg.model_path = a.model;
  cfg.validate();
  return cfg;
}

mcf::DemandSeries load_series(const CommonArgs& a) {
  mcf::DemandSeries s;
  s.matrices = mcf::load_demand_csv(a.demands);
  s.window = a.window;
  if (s.matrices.empty()) throw mcf::ParseError(a.demands + ": no timesteps");
  return s;
}

// Shared evaluate/scenario loop over the test split.
int run_evaluate(const CommonArgs& args, const std::string& stem) {
  mcf::ExperimentConfig cfg = make_config(args);
  mcf::Topology t = load_topo(args);
  mcf::PathCatalog cat = load_or_build_catalog(args, t);
  mcf::DemandSeries series = load_series(args);
  mcf::SeriesSplit split = mcf::split_series(series.size());
  if (split.val_end >= split.size)
    throw mcf::ValidationError("evaluate: series too short for a 7:1:2 split");

  const mcf::PolicyParams* policy = nullptr;
  std::vector<mcf::Subproblem> subs;
  mcf::LoadedPolicy loaded;
  if (cfg.method == mcf::Method::Pram || cfg.method == mcf::Method::DrlMono) {
    if (cfg.model_path.empty())
      throw mcf::ValidationError("evaluate: --model is required for policy methods");
    loaded = mcf::load_policy(cfg.model_path);
    if (loaded.config_digest != mcf::config_digest(cfg))
      std::cerr << "warning: model config digest differs from this run's context\n";
    policy = &loaded.params;
    subs = cfg.method == mcf::Method::Pram ? mcf::partition_by_source(t, cat, series)
                                           : mcf::monolithic_subproblem(t, cat, series);
  }

  mcf::RunResult result;
  result.config = cfg;
  result.digest = mcf::config_digest(cfg);
  for (std::size_t i = split.val_end; i < split.size; ++i) {
    mcf::DemandSeries history;
    history.window = series.window;
    history.matrices.assign(series.matrices.begin(),
                            series.matrices.begin() + static_cast<std::ptrdiff_t>(i));
    result.steps.push_back(mcf::evaluate_step(cfg, t, cat, history, series.matrices[i], i, policy,
                                              policy ? &subs : nullptr));
  }
  mcf::write_run_outputs(result, cfg.output_dir, stem);
  std::cout << mcf::run_to_json(result).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partitioned multi-commodity flow benchmark harness"};
  app.require_subcommand(1);

  CommonArgs args;

  // gen-demand
  auto* gen = app.add_subcommand("gen-demand", "synthesize a demand trace");
  std::string model = "gravity";
  int count = 100;
  double scale = 1.0, lam = 5.0, decay = 0.8, p_high = 0.1;
  double low_max = 1.0, high_min = 10.0, high_max = 20.0;
  bool normalize = false;
  std::string out_file = "demands.csv";
  gen->add_option("--topology", args.topology)->required();
  gen->add_option("--model", model, "gravity|poisson|bimodal")->capture_default_str();
  gen->add_option("--count", count, "number of timesteps")->capture_default_str();
  gen->add_option("--seed", args.seed)->capture_default_str();
  gen->add_option("--scale", scale)->capture_default_str();
  gen->add_option("--lam", lam, "poisson base rate")->capture_default_str();
  gen->add_option("--decay", decay, "poisson distance decay")->capture_default_str();
  gen->add_option("--p-high", p_high, "bimodal high fraction")->capture_default_str();
  gen->add_option("--low-max", low_max)->capture_default_str();
  gen->add_option("--high-min", high_min)->capture_default_str();
  gen->add_option("--high-max", high_max)->capture_default_str();
  gen->add_flag("--normalize", normalize, "divide by 10x the max link capacity");
  gen->add_option("--out", out_file)->capture_default_str();

  // build-paths
  auto* bp = app.add_subcommand("build-paths", "precompute the candidate-path catalog");
  bp->add_option("--topology", args.topology)->required();
  bp->add_option("--k", args.k)->capture_default_str();
  std::string paths_out = "paths.txt";
  bp->add_option("--out", paths_out)->capture_default_str();

  // solve
  auto* solve = app.add_subcommand("solve", "solve one demand matrix");
  add_instance_options(solve, args, true);
  solve->add_option("--method", args.method, "lp-f|lp-w|lp-top|pop|gd (+ -pred)")
      ->capture_default_str();
  solve->add_option("--objective", args.objective, "mlu|mtf|mcf")->capture_default_str();
  solve->add_option("--predictor", args.predictor)->capture_default_str();
  solve->add_option("--pop-replicas", args.pop_replicas)->capture_default_str();
  solve->add_option("--top-fraction", args.top_fraction)->capture_default_str();
  solve->add_option("--gd-iterations", args.gd_iterations)->capture_default_str();
  solve->add_option("--gd-eta", args.gd_eta)->capture_default_str();
  solve->add_option("--out", args.out_dir)->capture_default_str();
  solve->add_option("--emit-lp", args.emit_lp, "dump the LP-f problem to a text file");
  long t_index = -1;
  solve->add_option("--t-index", t_index, "timestep to solve (default: last)");

  // train
  auto* tr = app.add_subcommand("train", "fine-tune the partitioned policy");
  add_instance_options(tr, args, true);
  tr->add_option("--objective", args.objective)->capture_default_str();
  tr->add_option("--method", args.method, "pram|drl-mono")->default_val("pram");
  double lr = 0.1, sigma = 0.1;
  int epochs = 10, batch = 8, n_samples = 8, hidden = 0;
  long max_updates = 0;
  bool no_early_stop = false, no_normalize = false;
  tr->add_option("--lr", lr)->capture_default_str();
  tr->add_option("--sigma", sigma)->capture_default_str();
  tr->add_option("--epochs", epochs)->capture_default_str();
  tr->add_option("--batch", batch)->capture_default_str();
  tr->add_option("--n-samples", n_samples, "Monte Carlo counterfactual draws")
      ->capture_default_str();
  tr->add_option("--hidden", hidden,
                 "backbone layer width (0: 32 for pram, parameter-matched for drl-mono)")
      ->capture_default_str();
  tr->add_option("--max-updates", max_updates)->capture_default_str();
  tr->add_flag("--no-early-stop", no_early_stop);
  tr->add_flag("--no-normalize", no_normalize, "skip demand normalization");
  std::string model_out = "policy.bin";
  tr->add_option("--out", model_out, "model output file")->capture_default_str();
  std::string curve_out;
  tr->add_option("--curve", curve_out, "learning-curve CSV");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "replay the test split");
  add_instance_options(ev, args, true);
  ev->add_option("--method", args.method)->capture_default_str();
  ev->add_option("--objective", args.objective)->capture_default_str();
  ev->add_option("--predictor", args.predictor)->capture_default_str();
  ev->add_option("--pop-replicas", args.pop_replicas)->capture_default_str();
  ev->add_option("--top-fraction", args.top_fraction)->capture_default_str();
  ev->add_option("--gd-iterations", args.gd_iterations)->capture_default_str();
  ev->add_option("--gd-eta", args.gd_eta)->capture_default_str();
  ev->add_option("--model", args.model, "trained policy file (pram / drl-mono)");
  ev->add_option("--out", args.out_dir)->capture_default_str();

  // scenario
  auto* sc = app.add_subcommand("scenario", "evaluate under failures or fluctuation");
  add_instance_options(sc, args, true);
  sc->add_option("--method", args.method)->capture_default_str();
  sc->add_option("--objective", args.objective)->capture_default_str();
  sc->add_option("--predictor", args.predictor)->capture_default_str();
  sc->add_option("--pop-replicas", args.pop_replicas)->capture_default_str();
  sc->add_option("--top-fraction", args.top_fraction)->capture_default_str();
  sc->add_option("--gd-iterations", args.gd_iterations)->capture_default_str();
  sc->add_option("--gd-eta", args.gd_eta)->capture_default_str();
  sc->add_option("--model", args.model);
  sc->add_option("--failures", args.failures, "failed links per timestep")->capture_default_str();
  sc->add_option("--alpha", args.alpha, "fluctuation intensity")->capture_default_str();
  sc->add_option("--out", args.out_dir)->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "aggregate run summaries");
  std::vector<std::string> inputs;
  rep->add_option("inputs", inputs, "run JSON files")->required();
  std::string report_out;
  rep->add_option("--out", report_out, "write the table to a CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      mcf::Topology t = load_topo(args);
      std::vector<mcf::DemandMatrix> matrices;
      for (int i = 0; i < count; ++i) {
        std::uint64_t s = mcf::mix_seed(args.seed, static_cast<std::uint64_t>(i));
        if (model == "gravity") {
          matrices.push_back(mcf::gen_gravity(t, scale, s));
        } else if (model == "poisson") {
          matrices.push_back(mcf::gen_poisson(t, lam, decay, scale, s));
        } else if (model == "bimodal") {
          matrices.push_back(mcf::gen_bimodal(t, p_high, low_max, high_min, high_max, s));
        } else {
          throw mcf::ValidationError("unknown demand model: " + model);
        }
      }
      if (normalize) {
        mcf::DemandSeries tmp;
        tmp.matrices = std::move(matrices);
        matrices = mcf::normalize_series(tmp, t).series.matrices;
      }
      mcf::save_demand_csv(matrices, out_file);
      std::cout << "wrote " << count << " timesteps to " << out_file << "\n";
      return 0;
    }
    if (*bp) {
      mcf::Topology t = load_topo(args);
      mcf::PathCatalog cat = mcf::build_catalog(t, args.k);
      mcf::save_catalog(cat, paths_out);
      std::cout << "wrote " << cat.pair_count() << " pairs (k=" << cat.k() << ") to " << paths_out
                << "\n";
      return 0;
    }
    if (*solve) {
      mcf::ExperimentConfig cfg = make_config(args);
      mcf::Topology t = load_topo(args);
      mcf::PathCatalog cat = load_or_build_catalog(args, t);
      mcf::DemandSeries series = load_series(args);
      std::size_t index = t_index >= 0 ? static_cast<std::size_t>(t_index) : series.size() - 1;
      if (index >= series.size())
        throw mcf::ValidationError("solve: --t-index out of range");
      mcf::DemandSeries history;
      history.window = series.window;
      history.matrices.assign(series.matrices.begin(),
                              series.matrices.begin() + static_cast<std::ptrdiff_t>(index));
      if (!args.emit_lp.empty()) {
        std::ofstream lpout(args.emit_lp);
        lpout << mcf::dump_mlu_flow_lp(t, cat, series.matrices[index]);
      }
      if (cfg.predicted && history.matrices.empty())
        throw mcf::ValidationError("solve: predictor variants need history before --t-index");
      mcf::RunResult result;
      result.config = cfg;
      result.digest = mcf::config_digest(cfg);
      result.steps.push_back(mcf::evaluate_step(cfg, t, cat, history, series.matrices[index],
                                                index, nullptr, nullptr));
      mcf::write_run_outputs(result, cfg.output_dir, "solve");
      std::cout << mcf::run_to_json(result).dump(2) << "\n";
      return 0;
    }
    if (*tr) {
      mcf::ExperimentConfig cfg = make_config(args);
      if (cfg.method != mcf::Method::Pram && cfg.method != mcf::Method::DrlMono)
        throw mcf::ValidationError("train: --method must be pram or drl-mono");
      mcf::Topology t = load_topo(args);
      mcf::PathCatalog cat = load_or_build_catalog(args, t);
      mcf::DemandSeries series = load_series(args);
      if (!no_normalize) series = mcf::normalize_series(series, t).series;
      mcf::SeriesSplit split = mcf::split_series(series.size());
      mcf::DemandSeries train_part, val_part;
      train_part.window = val_part.window = series.window;
      train_part.matrices.assign(series.matrices.begin(),
                                 series.matrices.begin() +
                                     static_cast<std::ptrdiff_t>(split.train_end));
      val_part.matrices.assign(series.matrices.begin() +
                                   static_cast<std::ptrdiff_t>(split.train_end),
                               series.matrices.begin() +
                                   static_cast<std::ptrdiff_t>(split.val_end));
      mcf::TrainHyper hyper;
      hyper.lr = lr;
      hyper.sigma = sigma;
      hyper.epochs = epochs;
      hyper.batch = batch;
      hyper.n_samples = n_samples;
      if (hidden > 0) {
        hyper.hidden1 = hyper.hidden2 = hidden;
      } else if (cfg.method == mcf::Method::Pram) {
        hyper.hidden1 = hyper.hidden2 = 32;
      } else {
        // Match the monolithic baseline's parameter count to the partitioned
        // policy it stands against.
        int n = t.node_count();
        mcf::PolicyConfig ref;
        ref.input_dim = (n - 1) * (series.window + 1);
        ref.output_dim = (n - 1) * cfg.k_paths;
        ref.hidden1 = ref.hidden2 = 32;
        std::size_t pairs = cat.pair_count();
        auto [h1, h2] = mcf::matched_hidden_widths(
            static_cast<int>(pairs) * (series.window + 1),
            static_cast<int>(pairs) * cfg.k_paths,
            static_cast<long>(mcf::policy_param_count(ref)));
        hyper.hidden1 = h1;
        hyper.hidden2 = h2;
      }
      hyper.max_updates = max_updates;
      hyper.early_stop = !no_early_stop;
      hyper.partitioned = cfg.method == mcf::Method::Pram;
      hyper.seed = cfg.seed;
      mcf::TrainResult result =
          mcf::train(t, cat, train_part, cfg.objective, hyper,
                     val_part.size() > static_cast<std::size_t>(series.window) ? &val_part
                                                                               : nullptr);
      mcf::save_policy(result.params, mcf::config_digest(cfg), model_out);
      if (!curve_out.empty()) mcf::write_learning_curve(result, curve_out);
      std::cout << "trained " << result.updates << " updates over "
                << result.epoch_objective.size() << " epochs; model written to " << model_out
                << "\n";
      return 0;
    }
    if (*ev) return run_evaluate(args, "evaluate");
    if (*sc) return run_evaluate(args, "scenario");
    if (*rep) {
      std::vector<nlohmann::json> runs;
      for (const std::string& path : inputs) {
        std::ifstream in(path);
        if (!in) throw mcf::ParseError("cannot open " + path);
        nlohmann::json j;
        in >> j;
        runs.push_back(std::move(j));
      }
      for (std::size_t i = 1; i < runs.size(); ++i) {
        if (runs[i]["digest"] != runs[0]["digest"])
          throw mcf::ValidationError("report: config digest mismatch between " + inputs[0] +
                                     " and " + inputs[i] +
                                     " (runs are not from the same experiment context)");
      }
      std::ostringstream table;
      table << "method,objective,mean_raw,mean_normalized,mean_solve_seconds,timesteps\n";
      for (const auto& j : runs) {
        table << j["method"].get<std::string>() << "," << j["objective"].get<std::string>() << ","
              << j["mean_raw"].get<double>() << "," << j["mean_normalized"].get<double>() << ","
              << j["mean_solve_seconds"].get<double>() << "," << j["timesteps"].get<std::size_t>()
              << "\n";
      }
      std::cout << table.str();
      if (!report_out.empty()) {
        std::ofstream out(report_out);
        out << table.str();
      }
      return 0;
    }
  } catch (const mcf::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mcf::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mcf::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
