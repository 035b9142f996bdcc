#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dynclus/metric.hpp"

namespace dynclus {

// Exact minimum-cost assignment on a square cost matrix, O(n^3) Hungarian
// method with potentials (Jonker-Volgenant style row addition). Returns the
// column assigned to each row. The reported cost is re-summed over the chosen
// entries so it is exactly the sum the caller would compute.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, INF);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      int i0 = p[static_cast<std::size_t>(j0)], j1 = -1;
      double delta = INF;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)]
                     - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> rowToCol(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) rowToCol[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return rowToCol;
}

struct MatchingResult {
  double cost = 0.0;
  std::vector<int> assignment; // assignment[i] = index into Y matched with X[i]
};

// m(X,Y): minimum-weight perfect matching between equal-sized multisets of
// point ids under the instance metric.
inline MatchingResult minMatchingCost(const MetricInstance& inst, const std::vector<int>& X,
                                      const std::vector<int>& Y) {
  if (X.size() != Y.size()) throw std::invalid_argument("minMatchingCost: |X| != |Y|");
  const int n = static_cast<int>(X.size());
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      cost[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
          inst.d(X[static_cast<std::size_t>(a)], Y[static_cast<std::size_t>(b)]);
  MatchingResult res;
  res.assignment = hungarian(cost);
  for (int a = 0; a < n; ++a)
    res.cost += cost[static_cast<std::size_t>(a)][static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(a)])];
  return res;
}

// Kuhn's augmenting-path test: does a perfect matching exist in the bipartite
// graph with edge (a,b) iff allowed(a,b)?
template <typename Allowed>
inline bool hasPerfectMatching(int n, Allowed&& allowed) {
  std::vector<int> matchR(static_cast<std::size_t>(n), -1);
  std::vector<char> seen;
  std::function<bool(int)> tryKuhn = [&](int a) -> bool {
    for (int b = 0; b < n; ++b) {
      if (!allowed(a, b) || seen[static_cast<std::size_t>(b)]) continue;
      seen[static_cast<std::size_t>(b)] = true;
      if (matchR[static_cast<std::size_t>(b)] < 0 || tryKuhn(matchR[static_cast<std::size_t>(b)])) {
        matchR[static_cast<std::size_t>(b)] = a;
        return true;
      }
    }
    return false;
  };
  for (int a = 0; a < n; ++a) {
    seen.assign(static_cast<std::size_t>(n), false);
    if (!tryKuhn(a)) return false;
  }
  return true;
}

// Perfect matching between multisets X,Y minimizing the maximum pair
// distance. Used to certify dks movement bounds. Returns (bottleneck value,
// assignment); throws if X,Y differ in size.
inline MatchingResult bottleneckMatching(const MetricInstance& inst, const std::vector<int>& X,
                                         const std::vector<int>& Y) {
  if (X.size() != Y.size()) throw std::invalid_argument("bottleneckMatching: |X| != |Y|");
  const int n = static_cast<int>(X.size());
  MatchingResult res;
  if (n == 0) return res;
  std::vector<double> cands;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) cands.push_back(inst.d(X[static_cast<std::size_t>(a)], Y[static_cast<std::size_t>(b)]));
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  int lo = 0, hi = static_cast<int>(cands.size()) - 1;
  auto feasible = [&](double thr) {
    return hasPerfectMatching(n, [&](int a, int b) {
      return inst.d(X[static_cast<std::size_t>(a)], Y[static_cast<std::size_t>(b)]) <= thr + 1e-12;
    });
  };
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (feasible(cands[static_cast<std::size_t>(mid)]))
      hi = mid;
    else
      lo = mid + 1;
  }
  const double thr = cands[static_cast<std::size_t>(lo)];
  // Recover one realizing matching greedily via Kuhn on the threshold graph.
  std::vector<int> matchR(static_cast<std::size_t>(n), -1);
  std::vector<char> seen;
  std::function<bool(int)> tryKuhn = [&](int a) -> bool {
    for (int b = 0; b < n; ++b) {
      if (inst.d(X[static_cast<std::size_t>(a)], Y[static_cast<std::size_t>(b)]) > thr + 1e-12 ||
          seen[static_cast<std::size_t>(b)])
        continue;
      seen[static_cast<std::size_t>(b)] = true;
      if (matchR[static_cast<std::size_t>(b)] < 0 || tryKuhn(matchR[static_cast<std::size_t>(b)])) {
        matchR[static_cast<std::size_t>(b)] = a;
        return true;
      }
    }
    return false;
  };
  for (int a = 0; a < n; ++a) {
    seen.assign(static_cast<std::size_t>(n), false);
    if (!tryKuhn(a)) throw std::logic_error("bottleneckMatching: internal feasibility mismatch");
  }
  res.assignment.assign(static_cast<std::size_t>(n), -1);
  double worst = 0.0;
  for (int b = 0; b < n; ++b) {
    res.assignment[static_cast<std::size_t>(matchR[static_cast<std::size_t>(b)])] = b;
  }
  for (int a = 0; a < n; ++a)
    worst = std::max(worst, inst.d(X[static_cast<std::size_t>(a)], Y[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(a)])]));
  res.cost = worst;
  return res;
}

}  // namespace dynclus
