#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcf/common.hpp"
#include "mcf/demand.hpp"
#include "mcf/objectives.hpp"
#include "mcf/path_catalog.hpp"
#include "mcf/topology.hpp"

namespace mcf {

// ---------------------------------------------------------------------------
// Source partition.  One agent per source node manages every catalog pair
// leaving it.  Agent states are fixed-width (one slot per possible
// destination) so a single parameter set serves every agent.
// ---------------------------------------------------------------------------

struct Subproblem {
  int source = -1;  // -1 marks the monolithic pseudo-agent
  std::vector<std::size_t> pair_indices;
  std::vector<int> edge_subset;       // union of candidate-path edges
  std::vector<int> action_coords;     // head-output coordinates, pairs*k of them
  std::vector<double> state;
};

namespace detail {

inline int dest_slot(int source, int dest) { return dest < source ? dest : dest - 1; }

// Window of demands (oldest to newest, front-padded with zeros) plus the
// rolling mean, written into `out` starting at `base`.
inline void fill_pair_features(std::vector<double>& out, std::size_t base, int s, int d,
                               const DemandSeries& series, std::size_t end_index) {
  const int w = series.window;
  double mean = 0.0;
  for (int i = 0; i < w; ++i) {
    std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(end_index) - w + i;
    double v = idx >= 0 ? series.matrices[static_cast<std::size_t>(idx)](s, d) : 0.0;
    out[base + static_cast<std::size_t>(i)] = v;
    mean += v;
  }
  out[base + static_cast<std::size_t>(w)] = mean / static_cast<double>(w);
}

}  // namespace detail

// Rebuilds every agent's local state from the window ending just before
// `end_index` (i.e. matrices[end_index - window .. end_index - 1]).
inline void refresh_states(std::vector<Subproblem>& subs, const PathCatalog& cat,
                           const DemandSeries& series, std::size_t end_index) {
  const int feat = series.window + 1;
  for (Subproblem& sub : subs) {
    if (sub.source >= 0) {
      std::size_t slots = static_cast<std::size_t>(cat.node_count() - 1);
      sub.state.assign(slots * static_cast<std::size_t>(feat), 0.0);
      for (std::size_t q : sub.pair_indices) {
        int dest = cat.pair(q).second;
        std::size_t base = static_cast<std::size_t>(detail::dest_slot(sub.source, dest)) *
                           static_cast<std::size_t>(feat);
        detail::fill_pair_features(sub.state, base, sub.source, dest, series, end_index);
      }
    } else {
      sub.state.assign(sub.pair_indices.size() * static_cast<std::size_t>(feat), 0.0);
      for (std::size_t i = 0; i < sub.pair_indices.size(); ++i) {
        auto [s, d] = cat.pair(sub.pair_indices[i]);
        detail::fill_pair_features(sub.state, static_cast<std::size_t>(i) *
                                   static_cast<std::size_t>(feat), s, d, series, end_index);
      }
    }
  }
}

inline std::vector<Subproblem> partition_by_source(const Topology& t, const PathCatalog& cat,
                                                   const DemandSeries& history) {
  std::vector<Subproblem> subs;
  for (int s = 0; s < t.node_count(); ++s) {
    SourceSlice slice = restrict_to_source(cat, s);
    if (slice.pair_indices.empty()) continue;
    Subproblem sub;
    sub.source = s;
    sub.pair_indices = slice.pair_indices;
    sub.edge_subset = slice.edge_subset;
    for (std::size_t q : sub.pair_indices) {
      int base = detail::dest_slot(s, cat.pair(q).second) * cat.k();
      for (int j = 0; j < cat.k(); ++j) sub.action_coords.push_back(base + j);
    }
    subs.push_back(std::move(sub));
  }
  refresh_states(subs, cat, history, history.size());
  return subs;
}

// Single pseudo-agent owning every catalog pair; the unpartitioned baseline.
inline std::vector<Subproblem> monolithic_subproblem(const Topology& t, const PathCatalog& cat,
                                                     const DemandSeries& history) {
  Subproblem sub;
  sub.source = -1;
  for (std::size_t q = 0; q < cat.pair_count(); ++q) sub.pair_indices.push_back(q);
  for (int e = 0; e < t.edge_count(); ++e) sub.edge_subset.push_back(e);
  for (std::size_t i = 0; i < sub.pair_indices.size(); ++i)
    for (int j = 0; j < cat.k(); ++j)
      sub.action_coords.push_back(static_cast<int>(i) * cat.k() + j);
  std::vector<Subproblem> subs{std::move(sub)};
  refresh_states(subs, cat, history, history.size());
  return subs;
}

// ---------------------------------------------------------------------------
// Policy backbone: input standardization, two affine layers with tanh, and an
// affine mean head.  The action distribution is an isotropic Gaussian with
// fixed sigma around the head output.  Parameters live in one flat vector so
// updates, serialization, and finite-difference checks stay simple.
// ---------------------------------------------------------------------------

struct PolicyConfig {
  int input_dim = 0;
  int hidden1 = 32;
  int hidden2 = 32;
  int output_dim = 0;
  double sigma = 0.1;
  int window = 12;
  int k = 4;
};

inline std::size_t policy_param_count(const PolicyConfig& c) {
  return static_cast<std::size_t>(c.hidden1) * static_cast<std::size_t>(c.input_dim) +
         static_cast<std::size_t>(c.hidden1) +
         static_cast<std::size_t>(c.hidden2) * static_cast<std::size_t>(c.hidden1) +
         static_cast<std::size_t>(c.hidden2) +
         static_cast<std::size_t>(c.output_dim) * static_cast<std::size_t>(c.hidden2) +
         static_cast<std::size_t>(c.output_dim);
}

struct PolicyParams {
  PolicyConfig cfg;
  std::vector<double> theta;
  std::vector<double> shift;  // input standardization, applied before layer 1
  std::vector<double> scale;

  // Offsets into theta.
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + static_cast<std::size_t>(cfg.hidden1) * static_cast<std::size_t>(cfg.input_dim); }
  std::size_t w2() const { return b1() + static_cast<std::size_t>(cfg.hidden1); }
  std::size_t b2() const { return w2() + static_cast<std::size_t>(cfg.hidden2) * static_cast<std::size_t>(cfg.hidden1); }
  std::size_t w3() const { return b2() + static_cast<std::size_t>(cfg.hidden2); }
  std::size_t b3() const { return w3() + static_cast<std::size_t>(cfg.output_dim) * static_cast<std::size_t>(cfg.hidden2); }
};

inline PolicyParams init_policy(const PolicyConfig& cfg, std::uint64_t seed) {
  if (cfg.input_dim <= 0 || cfg.output_dim <= 0 || cfg.hidden1 <= 0 || cfg.hidden2 <= 0)
    throw ValidationError("init_policy: dimensions must be positive");
  if (!(cfg.sigma > 0.0)) throw ValidationError("init_policy: sigma must be positive");
  PolicyParams p;
  p.cfg = cfg;
  p.theta.assign(policy_param_count(cfg), 0.0);
  p.shift.assign(static_cast<std::size_t>(cfg.input_dim), 0.0);
  p.scale.assign(static_cast<std::size_t>(cfg.input_dim), 1.0);
  auto rng = substream(seed, 0x706f6cULL);
  auto xavier = [&](std::size_t off, int rows, int cols) {
    double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); ++i)
      p.theta[off + i] = u(rng);
  };
  xavier(p.w1(), cfg.hidden1, cfg.input_dim);
  xavier(p.w2(), cfg.hidden2, cfg.hidden1);
  xavier(p.w3(), cfg.output_dim, cfg.hidden2);
  return p;
}

struct ForwardCache {
  std::vector<double> x;   // standardized input
  std::vector<double> h1;  // tanh outputs
  std::vector<double> h2;
};

inline std::vector<double> policy_forward(const PolicyParams& p, std::span<const double> state,
                                          ForwardCache* cache = nullptr) {
  const PolicyConfig& c = p.cfg;
  if (state.size() != static_cast<std::size_t>(c.input_dim))
    throw ValidationError("policy_forward: state has " + std::to_string(state.size()) +
                          " features, policy expects " + std::to_string(c.input_dim));
  std::vector<double> x(static_cast<std::size_t>(c.input_dim));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (state[i] - p.shift[i]) * p.scale[i];
  std::vector<double> h1(static_cast<std::size_t>(c.hidden1));
  for (int r = 0; r < c.hidden1; ++r) {
    double z = p.theta[p.b1() + static_cast<std::size_t>(r)];
    const double* row = p.theta.data() + p.w1() + static_cast<std::size_t>(r) * static_cast<std::size_t>(c.input_dim);
    for (int i = 0; i < c.input_dim; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
    h1[static_cast<std::size_t>(r)] = std::tanh(z);
  }
  std::vector<double> h2(static_cast<std::size_t>(c.hidden2));
  for (int r = 0; r < c.hidden2; ++r) {
    double z = p.theta[p.b2() + static_cast<std::size_t>(r)];
    const double* row = p.theta.data() + p.w2() + static_cast<std::size_t>(r) * static_cast<std::size_t>(c.hidden1);
    for (int i = 0; i < c.hidden1; ++i) z += row[i] * h1[static_cast<std::size_t>(i)];
    h2[static_cast<std::size_t>(r)] = std::tanh(z);
  }
  std::vector<double> mu(static_cast<std::size_t>(c.output_dim));
  for (int r = 0; r < c.output_dim; ++r) {
    double z = p.theta[p.b3() + static_cast<std::size_t>(r)];
    const double* row = p.theta.data() + p.w3() + static_cast<std::size_t>(r) * static_cast<std::size_t>(c.hidden2);
    for (int i = 0; i < c.hidden2; ++i) z += row[i] * h2[static_cast<std::size_t>(i)];
    mu[static_cast<std::size_t>(r)] = z;
  }
  if (cache) {
    cache->x = std::move(x);
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return mu;
}

// Accumulates d(loss)/d(theta) for loss = <dmu, mu(state)> into grad.
inline void policy_backward(const PolicyParams& p, const ForwardCache& cache,
                            std::span<const double> dmu, std::vector<double>& grad) {
  const PolicyConfig& c = p.cfg;
  std::vector<double> dh2(static_cast<std::size_t>(c.hidden2), 0.0);
  for (int r = 0; r < c.output_dim; ++r) {
    double g = dmu[static_cast<std::size_t>(r)];
    if (g == 0.0) continue;
    grad[p.b3() + static_cast<std::size_t>(r)] += g;
    std::size_t row = p.w3() + static_cast<std::size_t>(r) * static_cast<std::size_t>(c.hidden2);
    for (int i = 0; i < c.hidden2; ++i) {
      grad[row + static_cast<std::size_t>(i)] += g * cache.h2[static_cast<std::size_t>(i)];
      dh2[static_cast<std::size_t>(i)] += g * p.theta[row + static_cast<std::size_t>(i)];
    }
  }
  std::vector<double> dh1(static_cast<std::size_t>(c.hidden1), 0.0);
  for (int r = 0; r < c.hidden2; ++r) {
    double hz = cache.h2[static_cast<std::size_t>(r)];
    double g = dh2[static_cast<std::size_t>(r)] * (1.0 - hz * hz);
    if (g == 0.0) continue;
    grad[p.b2() + static_cast<std::size_t>(r)] += g;
    std::size_t row = p.w2() + static_cast<std::size_t>(r) * static_cast<std::size_t>(c.hidden1);
    for (int i = 0; i < c.hidden1; ++i) {
      grad[row + static_cast<std::size_t>(i)] += g * cache.h1[static_cast<std::size_t>(i)];
      dh1[static_cast<std::size_t>(i)] += g * p.theta[row + static_cast<std::size_t>(i)];
    }
  }
  for (int r = 0; r < c.hidden1; ++r) {
    double hz = cache.h1[static_cast<std::size_t>(r)];
    double g = dh1[static_cast<std::size_t>(r)] * (1.0 - hz * hz);
    if (g == 0.0) continue;
    grad[p.b1() + static_cast<std::size_t>(r)] += g;
    std::size_t row = p.w1() + static_cast<std::size_t>(r) * static_cast<std::size_t>(c.input_dim);
    for (int i = 0; i < c.input_dim; ++i)
      grad[row + static_cast<std::size_t>(i)] += g * cache.x[static_cast<std::size_t>(i)];
  }
}

// ---------------------------------------------------------------------------
// Gaussian action head.
// ---------------------------------------------------------------------------

struct SampledAction {
  std::vector<double> action;
  double log_prob = 0.0;
};

inline double gaussian_log_prob(std::span<const double> action, std::span<const double> mean,
                                double sigma) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double lp = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    double z = action[i] - mean[i];
    lp += -0.5 * (std::log(two_pi * sigma * sigma) + (z * z) / (sigma * sigma));
  }
  return lp;
}

inline SampledAction sample_action(std::span<const double> mean, double sigma,
                                   std::uint64_t seed) {
  if (!(sigma > 0.0)) throw ValidationError("sample_action: sigma must be positive");
  auto rng = substream(seed, 0x616374ULL);
  std::normal_distribution<double> noise(0.0, sigma);
  SampledAction out;
  out.action.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) out.action[i] = mean[i] + noise(rng);
  out.log_prob = gaussian_log_prob(out.action, mean, sigma);
  return out;
}

// ---------------------------------------------------------------------------
// Action decoding: logistic squashing for split weights (renormalized inside
// the MLU evaluation), rectification for planned flows.
// ---------------------------------------------------------------------------

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline void decode_action_into(const Subproblem& sub, std::span<const double> action,
                               Objective objective, const PathCatalog& cat, Allocation& merged) {
  if (action.size() != sub.pair_indices.size() * static_cast<std::size_t>(cat.k()))
    throw ValidationError("decode_action: action dimension mismatch");
  for (std::size_t i = 0; i < sub.pair_indices.size(); ++i) {
    for (int j = 0; j < cat.k(); ++j) {
      double a = action[i * static_cast<std::size_t>(cat.k()) + static_cast<std::size_t>(j)];
      merged.values[cat.slot(sub.pair_indices[i], j)] =
          objective == Objective::Mlu ? logistic(a) : std::max(a, 0.0);
    }
  }
}

inline Allocation decode_joint_action(const std::vector<Subproblem>& subs,
                                      const std::vector<std::vector<double>>& actions,
                                      Objective objective, const PathCatalog& cat) {
  Allocation merged;
  merged.mode = objective == Objective::Mlu ? Allocation::Mode::Weights
                                            : Allocation::Mode::PlannedFlows;
  merged.values.assign(cat.slot_count(),
                       objective == Objective::Mlu ? 1.0 / static_cast<double>(cat.k()) : 0.0);
  for (std::size_t i = 0; i < subs.size(); ++i)
    decode_action_into(subs[i], actions[i], objective, cat, merged);
  return merged;
}

// Per-agent head means restricted to the agent's active output coordinates.
inline std::vector<double> active_means(const PolicyParams& p, const Subproblem& sub,
                                        ForwardCache* cache = nullptr) {
  std::vector<double> mu = policy_forward(p, sub.state, cache);
  std::vector<double> act(sub.action_coords.size());
  for (std::size_t i = 0; i < act.size(); ++i)
    act[i] = mu[static_cast<std::size_t>(sub.action_coords[i])];
  return act;
}

// ---------------------------------------------------------------------------
// Counterfactual advantage: A_i = R(a) - mean_j R(a_{-i}, a_i^(j)) with the
// replacement actions drawn from the agent's own policy.  One-step setting:
// the reward is the (sign-adjusted) objective of the decoded joint action.
// ---------------------------------------------------------------------------

using JointRewardFn = std::function<double(const std::vector<std::vector<double>>&)>;

inline std::vector<double> counterfactual_advantage(const std::vector<Subproblem>& subs,
                                                    const PolicyParams& params,
                                                    const std::vector<std::vector<double>>& actions,
                                                    const JointRewardFn& reward, int n_samples,
                                                    std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("counterfactual_advantage: n_samples must be >= 1");
  double base = reward(actions);
  std::vector<double> advantage(subs.size(), 0.0);
  parallel_for(subs.size(), [&](std::size_t i) {
    std::vector<double> mu = active_means(params, subs[i]);
    std::vector<std::vector<double>> probe = actions;
    double acc = 0.0;
    for (int j = 0; j < n_samples; ++j) {
      SampledAction alt = sample_action(mu, params.cfg.sigma,
                                        mix_seed(seed, 0x636661ULL, i, static_cast<std::uint64_t>(j)));
      probe[i] = std::move(alt.action);
      acc += reward(probe);
    }
    advantage[i] = base - acc / static_cast<double>(n_samples);
  });
  return advantage;
}

// ---------------------------------------------------------------------------
// REINFORCE update with analytic Gaussian log-prob gradients chained through
// the backbone: d log pi / d mu = (a - mu) / sigma^2 on the agent's active
// coordinates.
// ---------------------------------------------------------------------------

struct TrainSample {
  std::vector<std::vector<double>> states;   // per agent
  std::vector<std::vector<double>> actions;  // per agent, active coords
  std::vector<double> advantages;            // per agent
};

inline void reinforce_update(PolicyParams& params, const std::vector<Subproblem>& subs,
                             const std::vector<TrainSample>& batch, double lr) {
  if (batch.empty()) return;
  std::vector<double> grad(params.theta.size(), 0.0);
  std::vector<double> dmu(static_cast<std::size_t>(params.cfg.output_dim));
  const double inv_var = 1.0 / (params.cfg.sigma * params.cfg.sigma);
  for (const TrainSample& sample : batch) {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      double a_i = sample.advantages[i];
      if (a_i == 0.0) continue;
      if (!std::isfinite(a_i)) throw NumericError("reinforce_update: non-finite advantage");
      ForwardCache cache;
      std::vector<double> mu = policy_forward(params, sample.states[i], &cache);
      std::fill(dmu.begin(), dmu.end(), 0.0);
      for (std::size_t c = 0; c < subs[i].action_coords.size(); ++c) {
        std::size_t coord = static_cast<std::size_t>(subs[i].action_coords[c]);
        dmu[coord] = a_i * (sample.actions[i][c] - mu[coord]) * inv_var;
      }
      policy_backward(params, cache, dmu, grad);
    }
  }
  double scale = lr / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < params.theta.size(); ++i) {
    double step = scale * grad[i];
    if (!std::isfinite(step)) throw NumericError("reinforce_update: non-finite gradient");
    params.theta[i] += step;
  }
}

// ---------------------------------------------------------------------------
// Fine-tuning loop.
// ---------------------------------------------------------------------------

struct TrainHyper {
  double lr = 0.1;
  enum class LrSchedule { Constant, InvSqrt } lr_schedule = LrSchedule::InvSqrt;
  int batch = 8;
  int epochs = 10;
  int n_samples = 8;       // Monte Carlo counterfactual draws
  double sigma = 0.1;
  bool early_stop = true;
  int patience = 3;
  int hidden1 = 32;
  int hidden2 = 32;
  long max_updates = 0;    // 0: no cap
  bool partitioned = true; // false: monolithic baseline agent
  std::uint64_t seed = 1;
};

struct TrainResult {
  PolicyParams params;
  std::vector<Subproblem> subs;         // layout; states are scratch
  std::vector<double> epoch_objective;  // mean ground-truth objective while training
  std::vector<double> epoch_val;        // deployment objective on the validation split
  long updates = 0;
};

// Internal reward: objectives are maximized, so MLU enters negated.
inline double signed_reward(Objective objective, double value) {
  return objective == Objective::Mlu ? -value : value;
}

inline double evaluate_joint(const std::vector<Subproblem>& subs,
                             const std::vector<std::vector<double>>& actions, Objective objective,
                             const PathCatalog& cat, const Topology& t, const DemandMatrix& truth) {
  Allocation merged = decode_joint_action(subs, actions, objective, cat);
  switch (objective) {
    case Objective::Mlu: return eval_mlu(merged, truth, cat, t);
    case Objective::Mtf: return eval_mtf_mcf(merged, truth, cat, t).mtf;
    case Objective::Mcf: return eval_mtf_mcf(merged, truth, cat, t).mcf;
  }
  return 0.0;
}

// Deployment-mode (mean-action) objective at one timestep.
inline double deployment_objective(const PolicyParams& params, std::vector<Subproblem>& subs,
                                   const PathCatalog& cat, const Topology& t,
                                   const DemandSeries& series, std::size_t t_index,
                                   Objective objective) {
  refresh_states(subs, cat, series, t_index);
  std::vector<std::vector<double>> actions(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) actions[i] = active_means(params, subs[i]);
  return evaluate_joint(subs, actions, objective, cat, t, series.matrices[t_index]);
}

// Input standardization over the training samples' states.
inline void fit_standardization(PolicyParams& params, std::vector<Subproblem>& subs,
                                const PathCatalog& cat, const DemandSeries& series,
                                std::size_t first, std::size_t last) {
  std::size_t dim = static_cast<std::size_t>(params.cfg.input_dim);
  std::vector<double> sum(dim, 0.0), sumsq(dim, 0.0);
  std::size_t count = 0;
  for (std::size_t t_index = first; t_index < last; ++t_index) {
    refresh_states(subs, cat, series, t_index);
    for (const Subproblem& sub : subs) {
      for (std::size_t i = 0; i < dim; ++i) {
        sum[i] += sub.state[i];
        sumsq[i] += sub.state[i] * sub.state[i];
      }
      ++count;
    }
  }
  if (count == 0) return;
  for (std::size_t i = 0; i < dim; ++i) {
    double mean = sum[i] / static_cast<double>(count);
    double var = std::max(sumsq[i] / static_cast<double>(count) - mean * mean, 0.0);
    params.shift[i] = mean;
    params.scale[i] = 1.0 / std::max(std::sqrt(var), 1e-6);
  }
}

inline TrainResult train(const Topology& t, const PathCatalog& cat, const DemandSeries& series,
                         Objective objective, const TrainHyper& hyper,
                         const DemandSeries* val_series = nullptr) {
  if (series.size() < static_cast<std::size_t>(series.window) + 1)
    throw ValidationError("train: series must be longer than its window");

  TrainResult res;
  res.subs = hyper.partitioned ? partition_by_source(t, cat, series)
                               : monolithic_subproblem(t, cat, series);
  if (res.subs.empty()) throw ValidationError("train: no subproblems (empty catalog?)");

  PolicyConfig cfg;
  cfg.window = series.window;
  cfg.k = cat.k();
  cfg.sigma = hyper.sigma;
  cfg.hidden1 = hyper.hidden1;
  cfg.hidden2 = hyper.hidden2;
  cfg.input_dim = static_cast<int>(res.subs.front().state.size());
  cfg.output_dim = hyper.partitioned
                       ? (cat.node_count() - 1) * cat.k()
                       : static_cast<int>(res.subs.front().pair_indices.size()) * cat.k();
  res.params = init_policy(cfg, hyper.seed);

  std::vector<std::size_t> order;
  for (std::size_t i = static_cast<std::size_t>(series.window); i < series.size(); ++i)
    order.push_back(i);
  fit_standardization(res.params, res.subs, cat, series, order.front(), series.size());

  // Rewards are fed to the advantage estimator in units of the initial
  // deployment objective, so advantage magnitudes mean "relative change" and
  // the learning rate is insensitive to the demand scale.
  double probe = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(order.size(), 5); ++i) {
    probe = std::max(probe, std::abs(deployment_objective(res.params, res.subs, cat, t, series,
                                                          order[i], objective)));
    probe = std::max(probe, objective == Objective::Mtf
                                ? 0.1 * series.matrices[order[i]].total()
                                : 0.0);
  }
  const double reward_scale = 1.0 / std::max(probe, 1e-9);

  double best_val = -std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  std::vector<TrainSample> batch;
  batch.reserve(static_cast<std::size_t>(hyper.batch));
  long update_index = 0;
  bool stop = false;

  for (int epoch = 0; epoch < hyper.epochs && !stop; ++epoch) {
    auto rng = substream(hyper.seed, 0x65706fULL, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_obj = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t s = 0; s < order.size() && !stop; ++s) {
      std::size_t t_index = order[s];
      refresh_states(res.subs, cat, series, t_index);
      const DemandMatrix& truth = series.matrices[t_index];

      TrainSample sample;
      sample.states.resize(res.subs.size());
      sample.actions.resize(res.subs.size());
      std::uint64_t sample_seed =
          mix_seed(hyper.seed, 0x73616dULL, static_cast<std::uint64_t>(epoch), t_index);
      for (std::size_t i = 0; i < res.subs.size(); ++i) {
        sample.states[i] = res.subs[i].state;
        std::vector<double> mu = active_means(res.params, res.subs[i]);
        sample.actions[i] =
            sample_action(mu, cfg.sigma, mix_seed(sample_seed, i)).action;
      }
      JointRewardFn reward = [&](const std::vector<std::vector<double>>& acts) {
        return reward_scale * signed_reward(objective,
                                            evaluate_joint(res.subs, acts, objective, cat, t, truth));
      };
      sample.advantages = counterfactual_advantage(res.subs, res.params, sample.actions, reward,
                                                   hyper.n_samples, sample_seed);
      epoch_obj += evaluate_joint(res.subs, sample.actions, objective, cat, t, truth);
      ++epoch_count;
      batch.push_back(std::move(sample));
      if (static_cast<int>(batch.size()) >= hyper.batch) {
        ++update_index;
        double lr = hyper.lr_schedule == TrainHyper::LrSchedule::InvSqrt
                        ? hyper.lr / std::sqrt(static_cast<double>(update_index))
                        : hyper.lr;
        reinforce_update(res.params, res.subs, batch, lr);
        batch.clear();
        ++res.updates;
        if (hyper.max_updates > 0 && res.updates >= hyper.max_updates) stop = true;
      }
    }
    res.epoch_objective.push_back(epoch_count ? epoch_obj / static_cast<double>(epoch_count) : 0.0);

    if (val_series && val_series->size() > static_cast<std::size_t>(val_series->window)) {
      double val = 0.0;
      std::size_t n = 0;
      for (std::size_t i = static_cast<std::size_t>(val_series->window); i < val_series->size();
           ++i) {
        val += deployment_objective(res.params, res.subs, cat, t, *val_series, i, objective);
        ++n;
      }
      val /= static_cast<double>(n);
      res.epoch_val.push_back(val);
      double score = signed_reward(objective, val);
      if (score > best_val + 1e-12) {
        best_val = score;
        stale_epochs = 0;
      } else if (hyper.early_stop && ++stale_epochs >= hyper.patience) {
        break;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Failure heuristic: paths crossing failed edges get weight zero and each
// pair's surviving weights are renormalized; pairs with nothing left are
// flagged disconnected (weights all zero).
// ---------------------------------------------------------------------------

struct RescaleResult {
  Allocation allocation;
  std::vector<char> disconnected;  // per pair
};

inline RescaleResult rescale_on_failure(const Allocation& weights, const std::set<int>& failed,
                                        const PathCatalog& cat) {
  if (weights.mode != Allocation::Mode::Weights)
    throw ValidationError("rescale_on_failure: allocation must be weights");
  RescaleResult res;
  res.allocation = weights;
  res.disconnected.assign(cat.pair_count(), 0);
  if (failed.empty()) return res;
  for (std::size_t q = 0; q < cat.pair_count(); ++q) {
    double survivors = 0.0;
    for (int j = 0; j < cat.k(); ++j) {
      std::size_t slot = cat.slot(q, j);
      bool dead = false;
      for (int e : cat.slot_edges(slot))
        if (failed.count(e)) dead = true;
      if (dead) res.allocation.values[slot] = 0.0;
      survivors += res.allocation.values[slot];
    }
    if (survivors > 0.0) {
      for (int j = 0; j < cat.k(); ++j) res.allocation.values[cat.slot(q, j)] /= survivors;
    } else {
      res.disconnected[q] = 1;
      for (int j = 0; j < cat.k(); ++j) res.allocation.values[cat.slot(q, j)] = 0.0;
    }
  }
  return res;
}

// Hidden widths whose parameter count lands closest to `target` for the
// given in/out dimensions.  Layer widths are chosen independently so
// baselines can be sized to a reference model (the count is linear in h2
// once h1 is fixed).
inline std::pair<int, int> matched_hidden_widths(int input_dim, int output_dim, long target) {
  long best_diff = std::numeric_limits<long>::max();
  std::pair<int, int> best{1, 1};
  for (int h1 = 1; h1 <= 512; ++h1) {
    long fixed = static_cast<long>(h1) * (input_dim + 1) + output_dim;
    long per_h2 = static_cast<long>(h1) + 1 + output_dim;
    long ideal = (target - fixed + per_h2 / 2) / per_h2;
    for (long h2 : {ideal - 1, ideal, ideal + 1}) {
      if (h2 < 1 || h2 > 1 << 20) continue;
      long count = fixed + h2 * per_h2;
      long diff = std::labs(count - target);
      if (diff < best_diff) {
        best_diff = diff;
        best = {h1, static_cast<int>(h2)};
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Versioned binary serialization with an embedded config digest.
// ---------------------------------------------------------------------------

inline void save_policy(const PolicyParams& p, std::uint64_t config_digest,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  const char magic[8] = {'M', 'C', 'F', 'P', 'O', 'L', '0', '1'};
  out.write(magic, 8);
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto put_i32 = [&](int v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  put_u64(config_digest);
  put_i32(p.cfg.input_dim);
  put_i32(p.cfg.hidden1);
  put_i32(p.cfg.hidden2);
  put_i32(p.cfg.output_dim);
  put_i32(p.cfg.window);
  put_i32(p.cfg.k);
  put_f64(p.cfg.sigma);
  auto put_vec = [&](const std::vector<double>& v) {
    put_u64(v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  put_vec(p.shift);
  put_vec(p.scale);
  put_vec(p.theta);
}

struct LoadedPolicy {
  PolicyParams params;
  std::uint64_t config_digest = 0;
};

inline LoadedPolicy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open policy file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "MCFPOL01", 8) != 0)
    throw ParseError(path + ": not a policy file (bad magic)");
  LoadedPolicy lp;
  auto get_u64 = [&]() { std::uint64_t v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
  auto get_i32 = [&]() { int v; in.read(reinterpret_cast<char*>(&v), 4); return v; };
  auto get_f64 = [&]() { double v; in.read(reinterpret_cast<char*>(&v), 8); return v; };
  lp.config_digest = get_u64();
  lp.params.cfg.input_dim = get_i32();
  lp.params.cfg.hidden1 = get_i32();
  lp.params.cfg.hidden2 = get_i32();
  lp.params.cfg.output_dim = get_i32();
  lp.params.cfg.window = get_i32();
  lp.params.cfg.k = get_i32();
  lp.params.cfg.sigma = get_f64();
  auto get_vec = [&](std::vector<double>& v) {
    v.resize(get_u64());
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  get_vec(lp.params.shift);
  get_vec(lp.params.scale);
  get_vec(lp.params.theta);
  if (!in) throw ParseError(path + ": truncated policy file");
  if (lp.params.theta.size() != policy_param_count(lp.params.cfg))
    throw ParseError(path + ": parameter block does not match header dimensions");
  return lp;
}

}  // namespace mcf
