#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcf/common.hpp"

namespace mcf {

enum class RowSense { Le, Ge, Eq };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

// Linear program over named nonnegative variables with sparse constraint
// rows.  Kept deliberately small: the in-repo solver targets desk-scale
// instances (up to a few thousand variables).
class LpProblem {
 public:
  struct Row {
    std::vector<std::pair<int, double>> terms;
    RowSense sense = RowSense::Le;
    double rhs = 0.0;
  };

  explicit LpProblem(bool maximize = false) : maximize_(maximize) {}

  int add_var(std::string name, double objective_coeff = 0.0) {
    var_names_.push_back(std::move(name));
    obj_.push_back(objective_coeff);
    return static_cast<int>(var_names_.size()) - 1;
  }

  void set_objective_coeff(int var, double c) { obj_[static_cast<std::size_t>(var)] = c; }

  void add_constraint(std::vector<std::pair<int, double>> terms, RowSense sense, double rhs) {
    for (auto& [v, c] : terms) {
      if (v < 0 || v >= var_count())
        throw ValidationError("lp: constraint references undeclared variable");
      (void)c;
    }
    if (!std::isfinite(rhs)) throw ValidationError("lp: constraint rhs must be finite");
    rows_.push_back(Row{std::move(terms), sense, rhs});
  }

  bool maximize() const { return maximize_; }
  int var_count() const { return static_cast<int>(var_names_.size()); }
  std::size_t row_count() const { return rows_.size(); }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<double>& objective() const { return obj_; }
  const std::string& var_name(int v) const { return var_names_[static_cast<std::size_t>(v)]; }

  // Plain-text dump for debugging (variable list + constraint rows).
  std::string dump() const {
    std::ostringstream out;
    out << (maximize_ ? "maximize" : "minimize") << "\n  ";
    bool first = true;
    for (int v = 0; v < var_count(); ++v) {
      if (obj_[static_cast<std::size_t>(v)] == 0.0) continue;
      if (!first) out << " + ";
      out << format_double(obj_[static_cast<std::size_t>(v)]) << " " << var_name(v);
      first = false;
    }
    if (first) out << "0";
    out << "\nsubject to\n";
    for (const Row& r : rows_) {
      out << "  ";
      for (std::size_t i = 0; i < r.terms.size(); ++i) {
        if (i) out << " + ";
        out << format_double(r.terms[i].second) << " " << var_name(r.terms[i].first);
      }
      switch (r.sense) {
        case RowSense::Le: out << " <= "; break;
        case RowSense::Ge: out << " >= "; break;
        case RowSense::Eq: out << " = "; break;
      }
      out << format_double(r.rhs) << "\n";
    }
    out << "bounds\n";
    for (int v = 0; v < var_count(); ++v) out << "  " << var_name(v) << " >= 0\n";
    return out.str();
  }

 private:
  bool maximize_;
  std::vector<std::string> var_names_;
  std::vector<double> obj_;
  std::vector<Row> rows_;
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  long iterations = 0;

  double value(int var) const { return x[static_cast<std::size_t>(var)]; }
};

namespace detail {

// Dense simplex tableau with Bland's rule (lowest-index entering and, on
// ratio ties, lowest-index basic variable leaving), which precludes cycling.
class SimplexTableau {
 public:
  SimplexTableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_((rows + 1) * cols, 0.0), basis_(rows, -1) {}

  double& at(std::size_t r, std::size_t c) { return a_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return a_[r * cols_ + c]; }
  // Objective row is stored last.
  double& cost(std::size_t c) { return a_[rows_ * cols_ + c]; }
  double cost(std::size_t c) const { return a_[rows_ * cols_ + c]; }

  std::vector<int>& basis() { return basis_; }

  void pivot(std::size_t pr, std::size_t pc) {
    double piv = at(pr, pc);
    for (std::size_t c = 0; c < cols_; ++c) at(pr, c) /= piv;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      double factor = a_[r * cols_ + pc];
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c < cols_; ++c) a_[r * cols_ + c] -= factor * at(pr, c);
    }
    basis_[pr] = static_cast<int>(pc);
  }

  // Returns Optimal, Unbounded or IterationLimit for the minimization
  // encoded in the cost row (lower = better).  `active` marks columns
  // eligible to enter.
  LpStatus iterate(const std::vector<char>& active, long max_iters, long& iterations) {
    const double eps = 1e-9;
    while (iterations < max_iters) {
      // Bland: lowest-index column with negative reduced cost.
      std::size_t entering = cols_;
      for (std::size_t c = 0; c + 1 < cols_; ++c) {
        if (!active[c]) continue;
        if (cost(c) < -eps) {
          entering = c;
          break;
        }
      }
      if (entering == cols_) return LpStatus::Optimal;
      std::size_t leaving = rows_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r) {
        double coeff = at(r, entering);
        if (coeff > eps) {
          double ratio = at(r, cols_ - 1) / coeff;
          if (ratio < best_ratio - eps ||
              (ratio < best_ratio + eps &&
               (leaving == rows_ || basis_[r] < basis_[leaving]))) {
            best_ratio = ratio;
            leaving = r;
          }
        }
      }
      if (leaving == rows_) return LpStatus::Unbounded;
      pivot(leaving, entering);
      ++iterations;
    }
    return LpStatus::IterationLimit;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> a_;
  std::vector<int> basis_;
};

}  // namespace detail

// Two-phase dense simplex.  tol governs the feasibility check on the phase-1
// objective; reduced-cost and pivot tolerances are fixed at 1e-9.
inline LpSolution solve_lp(const LpProblem& p, double tol = 1e-7, long max_iters = 0) {
  const int n = p.var_count();
  if (n == 0) throw ValidationError("solve_lp: problem has no variables");
  const std::size_t m = p.row_count();
  if (max_iters <= 0) max_iters = 2000 + 200L * static_cast<long>(m + static_cast<std::size_t>(n));

  // Layout: [structural | slack/surplus | artificial | rhs].
  std::size_t slack_count = 0;
  for (const auto& r : p.rows())
    if (r.sense != RowSense::Eq) ++slack_count;
  std::size_t art_base_guess = static_cast<std::size_t>(n) + slack_count;
  std::size_t cols = art_base_guess + m + 1;  // upper bound; artificials may be fewer
  detail::SimplexTableau tab(m, cols);

  std::size_t next_slack = static_cast<std::size_t>(n);
  std::size_t next_art = art_base_guess;
  std::vector<std::size_t> art_cols;
  for (std::size_t r = 0; r < m; ++r) {
    const auto& row = p.rows()[r];
    double rhs = row.rhs;
    double sign = rhs < 0.0 ? -1.0 : 1.0;  // make rhs nonnegative
    for (const auto& [v, c] : row.terms) tab.at(r, static_cast<std::size_t>(v)) += sign * c;
    tab.at(r, cols - 1) = sign * rhs;
    RowSense sense = row.sense;
    if (sign < 0.0) {
      if (sense == RowSense::Le) sense = RowSense::Ge;
      else if (sense == RowSense::Ge) sense = RowSense::Le;
    }
    if (sense == RowSense::Le) {
      tab.at(r, next_slack) = 1.0;
      tab.basis()[r] = static_cast<int>(next_slack);
      ++next_slack;
    } else {
      if (sense == RowSense::Ge) tab.at(r, next_slack++) = -1.0;
      tab.at(r, next_art) = 1.0;
      tab.basis()[r] = static_cast<int>(next_art);
      art_cols.push_back(next_art);
      ++next_art;
    }
  }

  std::vector<char> active(cols, 1);
  LpSolution sol;
  sol.x.assign(static_cast<std::size_t>(n), 0.0);

  // Phase 1: minimize the sum of artificials.
  if (!art_cols.empty()) {
    for (std::size_t c = 0; c < cols; ++c) tab.cost(c) = 0.0;
    for (std::size_t c : art_cols) tab.cost(c) = 1.0;
    // Price out the artificial basis.
    for (std::size_t r = 0; r < m; ++r) {
      if (std::find(art_cols.begin(), art_cols.end(),
                    static_cast<std::size_t>(tab.basis()[r])) == art_cols.end())
        continue;
      for (std::size_t c = 0; c < cols; ++c) tab.cost(c) -= tab.at(r, c);
    }
    LpStatus st = tab.iterate(active, max_iters, sol.iterations);
    if (st == LpStatus::IterationLimit) {
      sol.status = st;
      return sol;
    }
    double phase1 = -tab.cost(cols - 1);
    if (phase1 > tol) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // Drive any lingering artificials out of the basis.
    for (std::size_t r = 0; r < m; ++r) {
      std::size_t b = static_cast<std::size_t>(tab.basis()[r]);
      if (std::find(art_cols.begin(), art_cols.end(), b) == art_cols.end()) continue;
      std::size_t pivot_col = cols;
      for (std::size_t c = 0; c < art_cols.front(); ++c) {
        if (std::abs(tab.at(r, c)) > 1e-9) {
          pivot_col = c;
          break;
        }
      }
      if (pivot_col != cols) {
        tab.pivot(r, pivot_col);
      }
      // A redundant row keeps its (zero-valued) artificial; it stays inert
      // because artificial columns are deactivated below.
    }
    for (std::size_t c : art_cols) active[c] = 0;
  }

  // Phase 2: the real objective (internally minimized).
  for (std::size_t c = 0; c < cols; ++c) tab.cost(c) = 0.0;
  for (int v = 0; v < n; ++v)
    tab.cost(static_cast<std::size_t>(v)) =
        p.maximize() ? -p.objective()[static_cast<std::size_t>(v)]
                     : p.objective()[static_cast<std::size_t>(v)];
  for (std::size_t r = 0; r < m; ++r) {
    int b = tab.basis()[r];
    double cb = tab.cost(static_cast<std::size_t>(b));
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) tab.cost(c) -= cb * tab.at(r, c);
  }
  LpStatus st = tab.iterate(active, max_iters, sol.iterations);
  sol.status = st;
  if (st != LpStatus::Optimal) return sol;

  for (std::size_t r = 0; r < m; ++r) {
    int b = tab.basis()[r];
    if (b >= 0 && b < n) sol.x[static_cast<std::size_t>(b)] = tab.at(r, cols - 1);
  }
  double obj = 0.0;
  for (int v = 0; v < n; ++v)
    obj += p.objective()[static_cast<std::size_t>(v)] * sol.x[static_cast<std::size_t>(v)];
  sol.objective = obj;
  return sol;
}

}  // namespace mcf
