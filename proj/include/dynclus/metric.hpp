#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynclus {

enum class ProblemKind { dokm, dks, dks_outlier, tm_mfl };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::dokm: return "dokm";
    case ProblemKind::dks: return "dks";
    case ProblemKind::dks_outlier: return "dks_outlier";
    case ProblemKind::tm_mfl: return "tm_mfl";
  }
  return "?";
}

inline ProblemKind problemKindFromString(const std::string& s) {
  if (s == "dokm") return ProblemKind::dokm;
  if (s == "dks") return ProblemKind::dks;
  if (s == "dks_outlier") return ProblemKind::dks_outlier;
  if (s == "tm_mfl") return ProblemKind::tm_mfl;
  throw std::invalid_argument("unknown problem kind: " + s);
}

// One time step: client and candidate-facility index sets into the instance
// point list, plus the per-kind annotations (ordered weights, outlier target,
// demands / facility weights).
struct TimeStep {
  std::vector<int> clients;
  std::vector<int> facilities;
  std::vector<double> weights;          // dokm: nonincreasing, |weights| == |clients|
  std::optional<int> outlier_target;    // dks_outlier: l_t
  std::vector<double> demands;          // tm_mfl: per client
  std::vector<double> facility_weights; // tm_mfl: per facility
};

// Finite metric plus the per-step structure. Immutable after load; all
// algorithms in this library treat it as read-only shared data.
struct MetricInstance {
  std::vector<std::vector<double>> coords; // optional provenance, may be empty
  std::vector<std::vector<double>> dist;   // dense symmetric matrix
  std::vector<TimeStep> steps;
  int k = 1;
  double gamma = 1.0;
  std::optional<double> B;
  ProblemKind kind = ProblemKind::dokm;

  std::size_t numPoints() const { return dist.size(); }
  double d(int a, int b) const { return dist[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; }
  int T() const { return static_cast<int>(steps.size()); }

  double dToSet(int j, const std::vector<int>& open) const {
    double best = std::numeric_limits<double>::infinity();
    for (int i : open) best = std::min(best, d(j, i));
    return best;
  }
};

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Validates symmetry, zero diagonal, nonnegativity and the triangle
// inequality. Tolerance is relative to the largest entry so that matrices
// derived from floating-point coordinates pass.
inline void validateMetric(const std::vector<std::vector<double>>& dist) {
  const std::size_t n = dist.size();
  double scale = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (dist[a].size() != n) throw MetricError("distance matrix is not square");
    for (std::size_t b = 0; b < n; ++b) {
      if (!std::isfinite(dist[a][b])) throw MetricError("non-finite distance");
      scale = std::max(scale, std::abs(dist[a][b]));
    }
  }
  const double eps = 1e-9 * std::max(1.0, scale);
  for (std::size_t a = 0; a < n; ++a) {
    if (std::abs(dist[a][a]) > eps) throw MetricError("nonzero diagonal");
    for (std::size_t b = 0; b < n; ++b) {
      if (dist[a][b] < -eps) throw MetricError("negative distance");
      if (std::abs(dist[a][b] - dist[b][a]) > eps) throw MetricError("asymmetric distance matrix");
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        if (dist[a][b] > dist[a][c] + dist[c][b] + eps)
          throw MetricError("triangle inequality violated");
}

inline void validateInstance(const MetricInstance& inst) {
  validateMetric(inst.dist);
  if (inst.k <= 0) throw MetricError("k must be positive");
  if (inst.gamma < 0) throw MetricError("gamma must be nonnegative");
  if (inst.steps.empty()) throw MetricError("instance has no time steps");
  const int n = static_cast<int>(inst.numPoints());
  auto checkIdx = [&](const std::vector<int>& v, const char* what) {
    for (int p : v)
      if (p < 0 || p >= n) throw MetricError(std::string("index out of range in ") + what);
  };
  for (const TimeStep& s : inst.steps) {
    checkIdx(s.clients, "clients");
    checkIdx(s.facilities, "facilities");
    if (!s.weights.empty()) {
      if (s.weights.size() != s.clients.size())
        throw MetricError("weight vector length does not match client count");
      for (std::size_t r = 0; r + 1 < s.weights.size(); ++r)
        if (s.weights[r] < s.weights[r + 1] - 1e-12)
          throw MetricError("weights must be nonincreasing");
      for (double w : s.weights)
        if (w < 0) throw MetricError("weights must be nonnegative");
    }
    if (s.outlier_target) {
      int l = *s.outlier_target;
      if (l < 0 || l > static_cast<int>(s.clients.size()))
        throw MetricError("outlier target out of range");
    }
    if (!s.demands.empty() && s.demands.size() != s.clients.size())
      throw MetricError("demand vector length does not match client count");
    if (!s.facility_weights.empty() && s.facility_weights.size() != s.facilities.size())
      throw MetricError("facility weight vector length does not match facility count");
  }
  if (inst.kind == ProblemKind::dks || inst.kind == ProblemKind::dks_outlier)
    if (!inst.B) throw MetricError("dks instances require a movement bound B");
}

// Sorts a copy of v in nonincreasing order, ties broken by original index
// (stable), so that outputs are reproducible.
inline std::vector<double> sortedNonincreasing(const std::vector<double>& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] > v[b]; });
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = v[static_cast<std::size_t>(idx[r])];
  return out;
}

// Ordered objective w . D-sorted-nonincreasing.
inline double orderedCost(const std::vector<double>& w, const std::vector<double>& D) {
  if (w.size() != D.size()) throw std::invalid_argument("orderedCost: |w| != |D|");
  for (std::size_t r = 0; r + 1 < w.size(); ++r)
    if (w[r] < w[r + 1] - 1e-12) throw std::invalid_argument("orderedCost: w not nonincreasing");
  std::vector<double> ds = sortedNonincreasing(D);
  double acc = 0.0;
  for (std::size_t r = 0; r < ds.size(); ++r) acc += w[r] * ds[r];
  return acc;
}

// Sum of the m largest entries of D, i.e. rect(m,|D|) . D-sorted.
inline double topMCost(int m, const std::vector<double>& D) {
  if (m < 1 || m > static_cast<int>(D.size())) throw std::invalid_argument("topMCost: m out of range");
  std::vector<double> ds = sortedNonincreasing(D);
  double acc = 0.0;
  for (int r = 0; r < m; ++r) acc += ds[static_cast<std::size_t>(r)];
  return acc;
}

}  // namespace dynclus
