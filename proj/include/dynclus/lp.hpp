#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynclus {

enum class Rel { LE, EQ, GE };

// A minimization program over variables with box bounds (lower defaults to 0,
// upper to +inf). Rows are stored sparsely.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  struct Row {
    std::vector<std::pair<int, double>> coeffs;
    Rel rel = Rel::LE;
    double rhs = 0.0;
  };
  std::vector<Row> rows;
  std::vector<double> lower; // empty means all-zero
  std::vector<double> upper; // empty means all +inf

  int addVar(double cost, double lo = 0.0, double hi = std::numeric_limits<double>::infinity()) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return num_vars++;
  }
  void addRow(std::vector<std::pair<int, double>> coeffs, Rel rel, double rhs) {
    rows.push_back(Row{std::move(coeffs), rel, rhs});
  }
};

struct LpSolution {
  std::vector<double> values;
  double objective_value = 0.0;
  std::vector<int> basis; // ids of basic variables at the returned vertex
};

class LpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class LpInfeasible : public LpError {
 public:
  LpInfeasible() : LpError("LP infeasible") {}
};
class LpUnbounded : public LpError {
 public:
  LpUnbounded() : LpError("LP unbounded") {}
};
class LpNumericalFailure : public LpError {
 public:
  LpNumericalFailure() : LpError("LP solver exceeded its cycling guard") {}
};

// Two-phase primal simplex on a dense tableau with Bland's anti-cycling rule.
// Finite lower bounds are shifted out, finite upper bounds become rows, so
// the returned point is always a vertex of the row system plus bounds. Built
// for desk-scale programs where determinism matters more than speed.
class SimplexSolver {
 public:
  static constexpr double kPivotTol = 1e-9;

  explicit SimplexSolver(const LinearProgram& lp) : lp_(lp) {
    if (lp.num_vars <= 0) throw LpError("LP has no variables");
    for (double c : lp.objective)
      if (!std::isfinite(c)) throw LpError("non-finite objective coefficient");
  }

  LpSolution solve() {
    buildStandardForm();
    phase(true);
    if (objectiveValue() > 1e-7) throw LpInfeasible();
    prepPhase2();
    phase(false);
    return extract();
  }

 private:
  const LinearProgram& lp_;
  int n_ = 0;           // structural (shifted) variables
  int totalCols_ = 0;   // structural + slack + artificial
  int firstArtificial_ = 0;
  std::vector<std::vector<double>> tab_; // m rows of totalCols_+1 (rhs last)
  std::vector<double> costRow_;
  std::vector<int> basis_;
  std::vector<double> shift_; // x = shift + xhat

  void buildStandardForm() {
    const int nv = lp_.num_vars;
    shift_.assign(static_cast<std::size_t>(nv), 0.0);
    for (int v = 0; v < nv; ++v)
      if (!lp_.lower.empty()) shift_[static_cast<std::size_t>(v)] = lp_.lower[static_cast<std::size_t>(v)];
    n_ = nv;

    // Collect all rows in shifted coordinates; finite uppers become rows.
    struct Raw {
      std::vector<std::pair<int, double>> c;
      Rel rel;
      double rhs;
    };
    std::vector<Raw> raws;
    for (const auto& row : lp_.rows) {
      Raw r{row.coeffs, row.rel, row.rhs};
      for (auto& pc : r.c) {
        if (pc.first < 0 || pc.first >= nv) throw LpError("row references unknown variable");
        r.rhs -= pc.second * shift_[static_cast<std::size_t>(pc.first)];
      }
      raws.push_back(std::move(r));
    }
    if (!lp_.upper.empty()) {
      for (int v = 0; v < nv; ++v) {
        double hi = lp_.upper[static_cast<std::size_t>(v)];
        if (std::isfinite(hi))
          raws.push_back(Raw{{{v, 1.0}}, Rel::LE, hi - shift_[static_cast<std::size_t>(v)]});
      }
    }

    const int m = static_cast<int>(raws.size());
    int slackCount = 0;
    for (const auto& r : raws)
      if (r.rel != Rel::EQ) ++slackCount;
    firstArtificial_ = n_ + slackCount;
    totalCols_ = firstArtificial_ + m; // one artificial per row at most
    tab_.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(totalCols_) + 1, 0.0));
    basis_.assign(static_cast<std::size_t>(m), -1);

    int slack = n_;
    int art = firstArtificial_;
    for (int i = 0; i < m; ++i) {
      Raw r = raws[static_cast<std::size_t>(i)];
      double sign = 1.0;
      if (r.rhs < 0) { // normalize to nonnegative rhs
        sign = -1.0;
        r.rhs = -r.rhs;
        if (r.rel == Rel::LE)
          r.rel = Rel::GE;
        else if (r.rel == Rel::GE)
          r.rel = Rel::LE;
      }
      auto& row = tab_[static_cast<std::size_t>(i)];
      for (auto& pc : r.c) row[static_cast<std::size_t>(pc.first)] += sign * pc.second;
      row[static_cast<std::size_t>(totalCols_)] = r.rhs;
      if (r.rel == Rel::LE) {
        row[static_cast<std::size_t>(slack)] = 1.0;
        basis_[static_cast<std::size_t>(i)] = slack; // slack starts basic
        ++slack;
      } else if (r.rel == Rel::GE) {
        row[static_cast<std::size_t>(slack)] = -1.0;
        ++slack;
        row[static_cast<std::size_t>(art)] = 1.0;
        basis_[static_cast<std::size_t>(i)] = art;
        ++art;
      } else {
        row[static_cast<std::size_t>(art)] = 1.0;
        basis_[static_cast<std::size_t>(i)] = art;
        ++art;
      }
    }

    // Phase-1 cost: sum of artificials, reduced against the starting basis.
    costRow_.assign(static_cast<std::size_t>(totalCols_) + 1, 0.0);
    for (int c = firstArtificial_; c < totalCols_; ++c) costRow_[static_cast<std::size_t>(c)] = 1.0;
    for (int i = 0; i < m; ++i)
      if (basis_[static_cast<std::size_t>(i)] >= firstArtificial_) subtractRow(i, 1.0);
  }

  void subtractRow(int row, double factor) {
    const auto& r = tab_[static_cast<std::size_t>(row)];
    for (std::size_t c = 0; c < costRow_.size(); ++c) costRow_[c] -= factor * r[c];
  }

  double objectiveValue() const { return -costRow_[static_cast<std::size_t>(totalCols_)]; }

  void pivot(int row, int col) {
    auto& pr = tab_[static_cast<std::size_t>(row)];
    const double pv = pr[static_cast<std::size_t>(col)];
    for (double& x : pr) x /= pv;
    for (std::size_t i = 0; i < tab_.size(); ++i) {
      if (static_cast<int>(i) == row) continue;
      double f = tab_[i][static_cast<std::size_t>(col)];
      if (std::abs(f) <= kPivotTol * 1e-3) continue;
      for (std::size_t c = 0; c < pr.size(); ++c) tab_[i][c] -= f * pr[c];
      tab_[i][static_cast<std::size_t>(col)] = 0.0;
    }
    double f = costRow_[static_cast<std::size_t>(col)];
    if (std::abs(f) > 0) {
      for (std::size_t c = 0; c < pr.size(); ++c) costRow_[c] -= f * pr[c];
      costRow_[static_cast<std::size_t>(col)] = 0.0;
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  void phase(bool artificialAllowed) {
    const int m = static_cast<int>(tab_.size());
    const long maxIter = 20000 + 200L * (m + totalCols_);
    for (long iter = 0;; ++iter) {
      if (iter > maxIter) throw LpNumericalFailure();
      // Bland: entering column is the lowest-index improving one.
      int enter = -1;
      const int colLimit = artificialAllowed ? totalCols_ : firstArtificial_;
      for (int c = 0; c < colLimit; ++c) {
        if (costRow_[static_cast<std::size_t>(c)] < -kPivotTol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return; // optimal for this phase
      int leave = -1;
      double bestRatio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        double a = tab_[static_cast<std::size_t>(i)][static_cast<std::size_t>(enter)];
        if (a > kPivotTol) {
          double ratio = tab_[static_cast<std::size_t>(i)][static_cast<std::size_t>(totalCols_)] / a;
          if (ratio < bestRatio - kPivotTol ||
              (ratio < bestRatio + kPivotTol &&
               (leave < 0 || basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])))
          {
            bestRatio = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) throw LpUnbounded();
      pivot(leave, enter);
    }
  }

  void prepPhase2() {
    const int m = static_cast<int>(tab_.size());
    // Drive artificials out of the basis; rows they cannot leave are
    // redundant and get neutralized.
    for (int i = 0; i < m; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < firstArtificial_) continue;
      int col = -1;
      for (int c = 0; c < firstArtificial_; ++c) {
        if (std::abs(tab_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]) > 1e-7) {
          col = c;
          break;
        }
      }
      if (col >= 0) pivot(i, col);
    }
    costRow_.assign(static_cast<std::size_t>(totalCols_) + 1, 0.0);
    for (int v = 0; v < n_; ++v) costRow_[static_cast<std::size_t>(v)] = lp_.objective[static_cast<std::size_t>(v)];
    // Artificials must never re-enter.
    for (int c = firstArtificial_; c < totalCols_; ++c)
      costRow_[static_cast<std::size_t>(c)] = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < m; ++i) {
      int b = basis_[static_cast<std::size_t>(i)];
      if (b < firstArtificial_ && std::abs(costRow_[static_cast<std::size_t>(b)]) > 0)
        subtractRow(i, costRow_[static_cast<std::size_t>(b)]);
    }
    // NaNs only served as a guard while reducing; replace with +inf-like.
    for (int c = firstArtificial_; c < totalCols_; ++c) costRow_[static_cast<std::size_t>(c)] = 1e30;
  }

  LpSolution extract() const {
    LpSolution sol;
    sol.values.assign(static_cast<std::size_t>(lp_.num_vars), 0.0);
    const int m = static_cast<int>(tab_.size());
    for (int i = 0; i < m; ++i) {
      int b = basis_[static_cast<std::size_t>(i)];
      if (b < n_)
        sol.values[static_cast<std::size_t>(b)] = tab_[static_cast<std::size_t>(i)][static_cast<std::size_t>(totalCols_)];
    }
    for (int v = 0; v < lp_.num_vars; ++v) sol.values[static_cast<std::size_t>(v)] += shift_[static_cast<std::size_t>(v)];
    double obj = 0.0;
    for (int v = 0; v < lp_.num_vars; ++v)
      obj += lp_.objective[static_cast<std::size_t>(v)] * sol.values[static_cast<std::size_t>(v)];
    sol.objective_value = obj;
    sol.basis.assign(basis_.begin(), basis_.end());
    return sol;
  }
};

inline LpSolution solveLP(const LinearProgram& lp) { return SimplexSolver(lp).solve(); }

// Maximum violation of rows and bounds at the given point; tests pin this
// below 1e-7 for every solution the solver returns.
inline double lpViolation(const LinearProgram& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (const auto& row : lp.rows) {
    double lhs = 0.0;
    for (auto& pc : row.coeffs) lhs += pc.second * x[static_cast<std::size_t>(pc.first)];
    if (row.rel == Rel::LE) worst = std::max(worst, lhs - row.rhs);
    if (row.rel == Rel::GE) worst = std::max(worst, row.rhs - lhs);
    if (row.rel == Rel::EQ) worst = std::max(worst, std::abs(lhs - row.rhs));
  }
  for (int v = 0; v < lp.num_vars; ++v) {
    double lo = lp.lower.empty() ? 0.0 : lp.lower[static_cast<std::size_t>(v)];
    double hi = lp.upper.empty() ? std::numeric_limits<double>::infinity() : lp.upper[static_cast<std::size_t>(v)];
    worst = std::max(worst, lo - x[static_cast<std::size_t>(v)]);
    if (std::isfinite(hi)) worst = std::max(worst, x[static_cast<std::size_t>(v)] - hi);
  }
  return worst;
}

}  // namespace dynclus
