#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "mcf/common.hpp"
#include "mcf/topology.hpp"

namespace mcf {

// Per ordered-pair nonnegative demand for one interval; zero diagonal.
class DemandMatrix {
 public:
  explicit DemandMatrix(int n) : n_(n), v_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0) {
    if (n <= 0) throw ValidationError("demand matrix: node count must be positive");
  }

  int node_count() const { return n_; }

  double operator()(int s, int t) const { return v_[idx(s, t)]; }

  void set(int s, int t, double value) {
    if (s == t) {
      if (value != 0.0) throw ValidationError("demand matrix: diagonal must stay zero");
      return;
    }
    if (!(value >= 0.0) || !std::isfinite(value))
      throw ValidationError("demand matrix: entries must be nonnegative reals");
    v_[idx(s, t)] = value;
  }

  double total() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s;
  }

  double max_entry() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, x);
    return m;
  }

  bool operator==(const DemandMatrix& o) const { return n_ == o.n_ && v_ == o.v_; }

 private:
  std::size_t idx(int s, int t) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(t);
  }
  int n_;
  std::vector<double> v_;
};

// Time-ordered demand matrices with a history window (default 12).
struct DemandSeries {
  std::vector<DemandMatrix> matrices;
  int window = 12;

  std::size_t size() const { return matrices.size(); }
  int node_count() const { return matrices.empty() ? 0 : matrices.front().node_count(); }
};

// ---------------------------------------------------------------------------
// Synthetic generators.  Each off-diagonal entry draws from its own RNG
// substream keyed by (seed, s, t), so generation is order- and
// parallelism-independent.
// ---------------------------------------------------------------------------

// Gravity model: out-capacity share of the source spreads over destinations
// proportionally to their in-capacity share (source excluded from the
// denominator); entries are truncated Gaussians around that fraction.
inline DemandMatrix gen_gravity(const Topology& t, double scale, std::uint64_t seed) {
  const int n = t.node_count();
  if (n < 2) throw ValidationError("gen_gravity: need at least 2 nodes");
  if (!(scale >= 0.0)) throw ValidationError("gen_gravity: scale must be nonnegative");
  std::vector<double> in_cap(static_cast<std::size_t>(n), 0.0), out_cap(static_cast<std::size_t>(n), 0.0);
  for (int e = 0; e < t.edge_count(); ++e) {
    out_cap[static_cast<std::size_t>(t.edge(e).src)] += t.capacity(e);
    in_cap[static_cast<std::size_t>(t.edge(e).dst)] += t.capacity(e);
  }
  double out_total = 0.0, in_total = 0.0;
  for (int u = 0; u < n; ++u) {
    out_total += out_cap[static_cast<std::size_t>(u)];
    in_total += in_cap[static_cast<std::size_t>(u)];
  }
  DemandMatrix d(n);
  for (int u = 0; u < n; ++u) {
    if (out_total <= 0.0) break;
    double norm_u = out_cap[static_cast<std::size_t>(u)] / out_total;
    double denom = in_total - in_cap[static_cast<std::size_t>(u)];
    for (int v = 0; v < n; ++v) {
      if (v == u) continue;
      if (denom <= 0.0) continue;  // isolated-sink structure: leave the entry at 0
      double frac = norm_u * in_cap[static_cast<std::size_t>(v)] / denom;
      if (frac <= 0.0) continue;
      auto rng = substream(seed, 0x67726176ULL, static_cast<std::uint64_t>(u),
                           static_cast<std::uint64_t>(v));
      std::normal_distribution<double> gauss(frac, frac / 4.0);
      d.set(u, v, std::max(gauss(rng), 0.0) * scale);
    }
  }
  return d;
}

// Hop distances from every node (unweighted BFS); -1 where unreachable.
inline std::vector<std::vector<int>> all_pairs_hop_distance(const Topology& t) {
  const int n = t.node_count();
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    auto& row = dist[static_cast<std::size_t>(s)];
    row.assign(static_cast<std::size_t>(n), -1);
    row[static_cast<std::size_t>(s)] = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int e : t.out_edges(u)) {
        int v = t.edge(e).dst;
        if (row[static_cast<std::size_t>(v)] == -1) {
          row[static_cast<std::size_t>(v)] = row[static_cast<std::size_t>(u)] + 1;
          q.push(v);
        }
      }
    }
  }
  return dist;
}

// Poisson model: entry (s,t) ~ Poisson(lam * decay^hops(s,t)) * scale.
// Unreachable pairs always get 0.
inline DemandMatrix gen_poisson(const Topology& t, double lam, double decay, double scale,
                                std::uint64_t seed) {
  if (!(lam >= 0.0)) throw ValidationError("gen_poisson: lam must be nonnegative");
  if (!(decay >= 0.0 && decay <= 1.0)) throw ValidationError("gen_poisson: decay must be in [0,1]");
  const int n = t.node_count();
  auto dist = all_pairs_hop_distance(t);
  DemandMatrix d(n);
  for (int s = 0; s < n; ++s) {
    for (int v = 0; v < n; ++v) {
      if (s == v) continue;
      int hops = dist[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)];
      if (hops < 0) continue;
      double mean = lam * std::pow(decay, hops);
      if (mean <= 0.0) continue;
      auto rng = substream(seed, 0x706f6973ULL, static_cast<std::uint64_t>(s),
                           static_cast<std::uint64_t>(v));
      std::poisson_distribution<long> pois(mean);
      d.set(s, v, static_cast<double>(pois(rng)) * scale);
    }
  }
  return d;
}

// Bimodal model: with probability p_high an entry is Uniform(high_min,
// high_max), otherwise Uniform(0, low_max).
inline DemandMatrix gen_bimodal(const Topology& t, double p_high, double low_max, double high_min,
                                double high_max, std::uint64_t seed) {
  if (!(p_high >= 0.0 && p_high <= 1.0))
    throw ValidationError("gen_bimodal: p_high must be in [0,1]");
  if (!(low_max >= 0.0)) throw ValidationError("gen_bimodal: low interval must be [0,a], a >= 0");
  if (!(high_min >= 0.0) || high_min > high_max)
    throw ValidationError("gen_bimodal: invalid high interval");
  const int n = t.node_count();
  DemandMatrix d(n);
  for (int s = 0; s < n; ++s) {
    for (int v = 0; v < n; ++v) {
      if (s == v) continue;
      auto rng = substream(seed, 0x62696d6fULL, static_cast<std::uint64_t>(s),
                           static_cast<std::uint64_t>(v));
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      bool high = coin(rng) < p_high;
      std::uniform_real_distribution<double> value(high ? high_min : 0.0,
                                                   high ? high_max : low_max);
      d.set(s, v, value(rng));
    }
  }
  return d;
}

// Per-pair sample standard deviation over the last `window` matrices of the
// history (population 1/N form).
inline std::vector<double> history_std(const DemandSeries& history) {
  if (history.matrices.empty()) throw ValidationError("history_std: empty history");
  const int n = history.node_count();
  std::size_t len = history.size();
  std::size_t use = std::min<std::size_t>(len, static_cast<std::size_t>(history.window));
  std::vector<double> out(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) {
    for (int v = 0; v < n; ++v) {
      if (s == v) continue;
      double mean = 0.0;
      for (std::size_t i = len - use; i < len; ++i) mean += history.matrices[i](s, v);
      mean /= static_cast<double>(use);
      double var = 0.0;
      for (std::size_t i = len - use; i < len; ++i) {
        double dv = history.matrices[i](s, v) - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(use);
      out[static_cast<std::size_t>(s) * static_cast<std::size_t>(n) + static_cast<std::size_t>(v)] =
          std::sqrt(var);
    }
  }
  return out;
}

// Adds alpha-scaled zero-mean Gaussian noise with per-pair std estimated from
// the history window; entries clamp at 0.
inline DemandMatrix inject_fluctuation(const DemandMatrix& d, const DemandSeries& history,
                                       double alpha, std::uint64_t seed) {
  if (!(alpha >= 0.0)) throw ValidationError("inject_fluctuation: alpha must be nonnegative");
  const int n = d.node_count();
  if (alpha == 0.0) return d;
  std::vector<double> sigma = history_std(history);
  DemandMatrix out(n);
  for (int s = 0; s < n; ++s) {
    for (int v = 0; v < n; ++v) {
      if (s == v) continue;
      double sd = sigma[static_cast<std::size_t>(s) * static_cast<std::size_t>(n) +
                        static_cast<std::size_t>(v)];
      double value = d(s, v);
      if (sd > 0.0) {
        auto rng = substream(seed, 0x666c7563ULL, static_cast<std::uint64_t>(s),
                             static_cast<std::uint64_t>(v));
        std::normal_distribution<double> gauss(0.0, sd);
        value = std::max(value + alpha * gauss(rng), 0.0);
      }
      out.set(s, v, value);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-parametric predictors.  Each predicts the next matrix per pair from at
// most `window` trailing observations.
// ---------------------------------------------------------------------------

enum class Predictor { MovingAverage, MeanValue, SeasonalNaive, LinearTrend };

inline const char* predictor_name(Predictor p) {
  switch (p) {
    case Predictor::MovingAverage: return "moving-average";
    case Predictor::MeanValue: return "mean-value";
    case Predictor::SeasonalNaive: return "seasonal-naive";
    case Predictor::LinearTrend: return "linear-trend";
  }
  return "?";
}

// season == 0 selects the default season length (the series window).
inline DemandMatrix predict(const DemandSeries& series, Predictor method, int season = 0) {
  const std::size_t len = series.size();
  const int n = series.node_count();
  if (len == 0) throw ValidationError("predict: empty series");
  std::size_t window = std::min<std::size_t>(len, static_cast<std::size_t>(series.window));
  DemandMatrix out(n);
  switch (method) {
    case Predictor::MovingAverage: {
      // Recency-linear weights w_i proportional to i over the window.
      double wsum = 0.0;
      for (std::size_t i = 1; i <= window; ++i) wsum += static_cast<double>(i);
      for (int s = 0; s < n; ++s)
        for (int v = 0; v < n; ++v) {
          if (s == v) continue;
          double acc = 0.0;
          for (std::size_t i = 1; i <= window; ++i)
            acc += static_cast<double>(i) * series.matrices[len - window + i - 1](s, v);
          out.set(s, v, acc / wsum);
        }
      break;
    }
    case Predictor::MeanValue: {
      for (int s = 0; s < n; ++s)
        for (int v = 0; v < n; ++v) {
          if (s == v) continue;
          double acc = 0.0;
          for (std::size_t i = len - window; i < len; ++i) acc += series.matrices[i](s, v);
          out.set(s, v, acc / static_cast<double>(window));
        }
      break;
    }
    case Predictor::SeasonalNaive: {
      std::size_t s_len = season > 0 ? static_cast<std::size_t>(season)
                                     : static_cast<std::size_t>(series.window);
      if (len < s_len)
        throw ValidationError(std::string("predict: insufficient history for ") +
                              predictor_name(method) + " (need season length " +
                              std::to_string(s_len) + ")");
      const DemandMatrix& src = series.matrices[len - s_len];
      for (int s = 0; s < n; ++s)
        for (int v = 0; v < n; ++v)
          if (s != v) out.set(s, v, src(s, v));
      break;
    }
    case Predictor::LinearTrend: {
      if (len < 2)
        throw ValidationError(std::string("predict: insufficient history for ") +
                              predictor_name(method) + " (need 2 observations)");
      const DemandMatrix& last = series.matrices[len - 1];
      const DemandMatrix& prev = series.matrices[len - 2];
      for (int s = 0; s < n; ++s)
        for (int v = 0; v < n; ++v)
          if (s != v) out.set(s, v, std::max(2.0 * last(s, v) - prev(s, v), 0.0));
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization: every matrix divided by ten times the maximum link capacity;
// the returned factor de-normalizes (multiply to recover the input).
// ---------------------------------------------------------------------------

struct NormalizedSeries {
  DemandSeries series;
  double factor = 1.0;  // original = normalized * factor
};

inline NormalizedSeries normalize_series(const DemandSeries& in, const Topology& t) {
  double factor = 10.0 * t.max_capacity();
  NormalizedSeries out;
  out.factor = factor;
  out.series.window = in.window;
  out.series.matrices.reserve(in.size());
  for (const DemandMatrix& m : in.matrices) {
    DemandMatrix scaled(m.node_count());
    for (int s = 0; s < m.node_count(); ++s)
      for (int v = 0; v < m.node_count(); ++v)
        if (s != v) scaled.set(s, v, m(s, v) / factor);
    out.series.matrices.push_back(std::move(scaled));
  }
  return out;
}

inline DemandMatrix scale_matrix(const DemandMatrix& m, double factor) {
  DemandMatrix out(m.node_count());
  for (int s = 0; s < m.node_count(); ++s)
    for (int v = 0; v < m.node_count(); ++v)
      if (s != v) out.set(s, v, m(s, v) * factor);
  return out;
}

// ---------------------------------------------------------------------------
// Demand trace CSV: header "s:t" per ordered pair in lexicographic order, one
// row per timestep.  Also the ingestion format for external traces.
// ---------------------------------------------------------------------------

inline void write_demand_csv(const std::vector<DemandMatrix>& matrices, std::ostream& out) {
  if (matrices.empty()) throw ValidationError("write_demand_csv: nothing to write");
  const int n = matrices.front().node_count();
  bool first = true;
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      if (s == t) continue;
      if (!first) out << ",";
      out << s << ":" << t;
      first = false;
    }
  out << "\n";
  for (const DemandMatrix& m : matrices) {
    first = true;
    for (int s = 0; s < n; ++s)
      for (int t = 0; t < n; ++t) {
        if (s == t) continue;
        if (!first) out << ",";
        out << format_double(m(s, t));
        first = false;
      }
    out << "\n";
  }
}

inline void save_demand_csv(const std::vector<DemandMatrix>& matrices, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  write_demand_csv(matrices, out);
}

inline std::vector<DemandMatrix> parse_demand_csv(std::istream& in,
                                                  const std::string& origin = "<stream>") {
  std::string header;
  if (!std::getline(in, header)) throw ParseError(origin + ": empty demand trace");
  std::vector<std::pair<int, int>> columns;
  {
    std::istringstream hs(header);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      auto colon = cell.find(':');
      if (colon == std::string::npos)
        throw ParseError(origin + ":1: header cells must be \"s:t\"");
      columns.push_back({std::stoi(cell.substr(0, colon)), std::stoi(cell.substr(colon + 1))});
    }
  }
  int n = 0;
  for (auto& c : columns) n = std::max({n, c.first + 1, c.second + 1});
  if (columns.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1))
    throw ParseError(origin + ": header must cover all n*(n-1) ordered pairs");
  std::vector<DemandMatrix> out;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    DemandMatrix m(n);
    std::istringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      if (col >= columns.size())
        throw ParseError(origin + ":" + std::to_string(line_no) + ": too many columns");
      m.set(columns[col].first, columns[col].second, std::stod(cell));
      ++col;
    }
    if (col != columns.size())
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(columns.size()) + " columns, got " + std::to_string(col));
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<DemandMatrix> load_demand_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open demand trace: " + path);
  return parse_demand_csv(in, path);
}

}  // namespace mcf
