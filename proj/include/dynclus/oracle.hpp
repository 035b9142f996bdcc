#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dynclus/matching.hpp"
#include "dynclus/metric.hpp"
#include "dynclus/schedule.hpp"

namespace dynclus {

// Exact reference solvers. Exhaustive by design; they are the certificates
// the approximation factors are measured against, so clarity beats speed.

class OracleCapExceeded : public std::runtime_error {
 public:
  OracleCapExceeded() : std::runtime_error("oracle search space exceeds the hard cap") {}
};

struct OracleResult {
  double objective = 0.0;
  Schedule schedule;
  long long states = 0;
};

namespace detail {

// All size-k multisets over {0..n-1}, as nondecreasing index vectors.
inline void multisets(int n, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(static_cast<std::size_t>(k), 0);
  if (n == 0) return; // no facilities: nothing to enumerate
  for (;;) {
    out.push_back(cur);
    int pos = k - 1;
    while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == n - 1) --pos;
    if (pos < 0) break;
    int nv = cur[static_cast<std::size_t>(pos)] + 1;
    for (int q = pos; q < k; ++q) cur[static_cast<std::size_t>(q)] = nv;
  }
}

inline std::vector<int> toPoints(const std::vector<int>& facilities, const std::vector<int>& combo) {
  std::vector<int> pts;
  pts.reserve(combo.size());
  for (int i : combo) pts.push_back(facilities[static_cast<std::size_t>(i)]);
  return pts;
}

inline long long countMultisets(int n, int k) {
  long long c = 1;
  for (int q = 1; q <= k; ++q) {
    c = c * (n + q - 1) / q;
    if (c > (1LL << 40)) return c;
  }
  return c;
}

}  // namespace detail

// Dynamic ordered k-median by dynamic programming over per-step placements:
// exact service costs per placement, exact Hungarian matchings per
// transition.
inline OracleResult bruteForceDokm(const MetricInstance& inst, long long cap = 10000000) {
  const int T = inst.T();
  std::vector<std::vector<std::vector<int>>> placements(static_cast<std::size_t>(T));
  long long states = 1;
  for (int t = 0; t < T; ++t) {
    const TimeStep& s = inst.steps[static_cast<std::size_t>(t)];
    long long cnt = detail::countMultisets(static_cast<int>(s.facilities.size()), inst.k);
    if (cnt == 0) throw std::invalid_argument("oracle: a step has no facility locations");
    states *= cnt;
    if (states > cap) throw OracleCapExceeded();
    detail::multisets(static_cast<int>(s.facilities.size()), inst.k, placements[static_cast<std::size_t>(t)]);
  }
  // transition work is bounded by the pairwise products
  for (int t = 0; t + 1 < T; ++t)
    if (static_cast<long long>(placements[static_cast<std::size_t>(t)].size()) *
            static_cast<long long>(placements[static_cast<std::size_t>(t) + 1].size()) >
        cap)
      throw OracleCapExceeded();

  auto serviceCost = [&](int t, const std::vector<int>& pts) {
    const TimeStep& s = inst.steps[static_cast<std::size_t>(t)];
    std::vector<double> D;
    D.reserve(s.clients.size());
    for (int j : s.clients) D.push_back(inst.dToSet(j, pts));
    std::vector<double> w = s.weights;
    if (w.empty()) w.assign(s.clients.size(), 1.0);
    return orderedCost(w, D);
  };

  std::vector<std::vector<double>> dp(static_cast<std::size_t>(T));
  std::vector<std::vector<int>> parent(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    dp[static_cast<std::size_t>(t)].assign(placements[static_cast<std::size_t>(t)].size(), 0.0);
    parent[static_cast<std::size_t>(t)].assign(placements[static_cast<std::size_t>(t)].size(), -1);
  }
  for (std::size_t a = 0; a < placements[0].size(); ++a)
    dp[0][a] = serviceCost(0, detail::toPoints(inst.steps[0].facilities, placements[0][a]));
  for (int t = 1; t < T; ++t) {
    for (std::size_t a = 0; a < placements[static_cast<std::size_t>(t)].size(); ++a) {
      std::vector<int> ptsA = detail::toPoints(inst.steps[static_cast<std::size_t>(t)].facilities,
                                               placements[static_cast<std::size_t>(t)][a]);
      double svc = serviceCost(t, ptsA);
      double best = std::numeric_limits<double>::infinity();
      int bestPrev = -1;
      for (std::size_t p = 0; p < placements[static_cast<std::size_t>(t) - 1].size(); ++p) {
        std::vector<int> ptsP = detail::toPoints(inst.steps[static_cast<std::size_t>(t) - 1].facilities,
                                                 placements[static_cast<std::size_t>(t) - 1][p]);
        double move = inst.gamma * minMatchingCost(inst, ptsP, ptsA).cost;
        double cand = dp[static_cast<std::size_t>(t) - 1][p] + move;
        if (cand < best) {
          best = cand;
          bestPrev = static_cast<int>(p);
        }
      }
      dp[static_cast<std::size_t>(t)][a] = best + svc;
      parent[static_cast<std::size_t>(t)][a] = bestPrev;
    }
  }
  std::size_t bestEnd = 0;
  for (std::size_t a = 1; a < dp[static_cast<std::size_t>(T - 1)].size(); ++a)
    if (dp[static_cast<std::size_t>(T - 1)][a] < dp[static_cast<std::size_t>(T - 1)][bestEnd]) bestEnd = a;

  OracleResult res;
  res.states = states;
  std::vector<std::size_t> chain(static_cast<std::size_t>(T));
  chain[static_cast<std::size_t>(T - 1)] = bestEnd;
  for (int t = T - 1; t > 0; --t)
    chain[static_cast<std::size_t>(t - 1)] =
        static_cast<std::size_t>(parent[static_cast<std::size_t>(t)][chain[static_cast<std::size_t>(t)]]);
  Schedule sched;
  for (int t = 0; t < T; ++t)
    sched.open_sets.push_back(detail::toPoints(inst.steps[static_cast<std::size_t>(t)].facilities,
                                               placements[static_cast<std::size_t>(t)][chain[static_cast<std::size_t>(t)]]));
  res.schedule = evaluateSchedule(inst, std::move(sched));
  res.objective = res.schedule.total_cost;
  return res;
}

namespace detail {

inline bool bMatchable(const MetricInstance& inst, const std::vector<int>& A, const std::vector<int>& A2) {
  const double B = inst.B.value();
  return hasPerfectMatching(static_cast<int>(A.size()), [&](int a, int b) {
    return inst.d(A[static_cast<std::size_t>(a)], A2[static_cast<std::size_t>(b)]) <= B + 1e-12;
  });
}

// Radius needed to serve all but the allowed outliers: the l-th smallest
// client service distance (0 when l == 0).
inline double coverageRadius(const MetricInstance& inst, int t, const std::vector<int>& pts, int l) {
  if (l <= 0) return 0.0;
  std::vector<double> D;
  for (int j : inst.steps[static_cast<std::size_t>(t)].clients) D.push_back(inst.dToSet(j, pts));
  std::sort(D.begin(), D.end());
  return D[static_cast<std::size_t>(l - 1)];
}

}  // namespace detail

// Dynamic k-supplier: DP over placements minimizing the maximum service
// radius subject to B-matchable consecutive placements.
inline OracleResult bruteForceDks(const MetricInstance& inst, long long cap = 10000000) {
  const int T = inst.T();
  std::vector<std::vector<std::vector<int>>> placements(static_cast<std::size_t>(T));
  long long states = 1;
  for (int t = 0; t < T; ++t) {
    const TimeStep& s = inst.steps[static_cast<std::size_t>(t)];
    long long cnt = detail::countMultisets(static_cast<int>(s.facilities.size()), inst.k);
    if (cnt == 0) throw std::invalid_argument("oracle: a step has no facility locations");
    states *= cnt;
    if (states > cap) throw OracleCapExceeded();
    detail::multisets(static_cast<int>(s.facilities.size()), inst.k, placements[static_cast<std::size_t>(t)]);
  }

  auto radius = [&](int t, const std::vector<int>& pts) {
    double r = 0.0;
    for (int j : inst.steps[static_cast<std::size_t>(t)].clients) r = std::max(r, inst.dToSet(j, pts));
    return r;
  };

  const double INF = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dp(static_cast<std::size_t>(T));
  std::vector<std::vector<int>> parent(static_cast<std::size_t>(T));
  std::vector<std::vector<std::vector<int>>> pts(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    pts[static_cast<std::size_t>(t)].reserve(placements[static_cast<std::size_t>(t)].size());
    for (auto& combo : placements[static_cast<std::size_t>(t)])
      pts[static_cast<std::size_t>(t)].push_back(
          detail::toPoints(inst.steps[static_cast<std::size_t>(t)].facilities, combo));
    dp[static_cast<std::size_t>(t)].assign(placements[static_cast<std::size_t>(t)].size(), INF);
    parent[static_cast<std::size_t>(t)].assign(placements[static_cast<std::size_t>(t)].size(), -1);
  }
  for (std::size_t a = 0; a < pts[0].size(); ++a) dp[0][a] = radius(0, pts[0][a]);
  for (int t = 1; t < T; ++t)
    for (std::size_t a = 0; a < pts[static_cast<std::size_t>(t)].size(); ++a) {
      double r = radius(t, pts[static_cast<std::size_t>(t)][a]);
      for (std::size_t p = 0; p < pts[static_cast<std::size_t>(t) - 1].size(); ++p) {
        if (dp[static_cast<std::size_t>(t) - 1][p] == INF) continue;
        if (!detail::bMatchable(inst, pts[static_cast<std::size_t>(t) - 1][p], pts[static_cast<std::size_t>(t)][a]))
          continue;
        double cand = std::max(dp[static_cast<std::size_t>(t) - 1][p], r);
        if (cand < dp[static_cast<std::size_t>(t)][a]) {
          dp[static_cast<std::size_t>(t)][a] = cand;
          parent[static_cast<std::size_t>(t)][a] = static_cast<int>(p);
        }
      }
    }
  std::size_t bestEnd = 0;
  bool any = false;
  for (std::size_t a = 0; a < dp[static_cast<std::size_t>(T - 1)].size(); ++a)
    if (dp[static_cast<std::size_t>(T - 1)][a] < dp[static_cast<std::size_t>(T - 1)][bestEnd] || !any) {
      if (dp[static_cast<std::size_t>(T - 1)][a] < INF) {
        bestEnd = a;
        any = true;
      }
    }
  if (!any) throw DksInfeasible();

  OracleResult res;
  res.states = states;
  std::vector<std::size_t> chain(static_cast<std::size_t>(T));
  chain[static_cast<std::size_t>(T - 1)] = bestEnd;
  for (int t = T - 1; t > 0; --t)
    chain[static_cast<std::size_t>(t - 1)] =
        static_cast<std::size_t>(parent[static_cast<std::size_t>(t)][chain[static_cast<std::size_t>(t)]]);
  Schedule sched;
  for (int t = 0; t < T; ++t)
    sched.open_sets.push_back(pts[static_cast<std::size_t>(t)][chain[static_cast<std::size_t>(t)]]);
  res.schedule = evaluateSchedule(inst, std::move(sched));
  res.objective = res.schedule.service_cost; // realized radius
  return res;
}

// Outlier variant, T = 2: minimize over B-matchable placement pairs of the
// radius that still covers l_t clients per step.
inline OracleResult bruteForceDksOutlier(const MetricInstance& inst, long long cap = 10000000) {
  if (inst.T() != 2) throw std::invalid_argument("outlier oracle: T must be 2");
  const TimeStep& s1 = inst.steps[0];
  const TimeStep& s2 = inst.steps[1];
  const int l1 = s1.outlier_target.value_or(static_cast<int>(s1.clients.size()));
  const int l2 = s2.outlier_target.value_or(static_cast<int>(s2.clients.size()));
  std::vector<std::vector<int>> p1, p2;
  detail::multisets(static_cast<int>(s1.facilities.size()), inst.k, p1);
  detail::multisets(static_cast<int>(s2.facilities.size()), inst.k, p2);
  if (p1.empty() || p2.empty()) throw std::invalid_argument("oracle: a step has no facility locations");
  if (static_cast<long long>(p1.size()) * static_cast<long long>(p2.size()) > cap) throw OracleCapExceeded();

  OracleResult res;
  res.states = static_cast<long long>(p1.size()) * static_cast<long long>(p2.size());
  double best = std::numeric_limits<double>::infinity();
  for (auto& c1 : p1) {
    std::vector<int> A1 = detail::toPoints(s1.facilities, c1);
    double r1 = detail::coverageRadius(inst, 0, A1, l1);
    if (r1 >= best) continue;
    for (auto& c2 : p2) {
      std::vector<int> A2 = detail::toPoints(s2.facilities, c2);
      double r = std::max(r1, detail::coverageRadius(inst, 1, A2, l2));
      if (r >= best) continue;
      if (!detail::bMatchable(inst, A1, A2)) continue;
      best = r;
      res.schedule.open_sets = {A1, A2};
    }
  }
  if (!std::isfinite(best)) throw DksInfeasible();
  res.schedule.transitions.clear();
  res.schedule = evaluateSchedule(inst, std::move(res.schedule));
  res.objective = best;
  return res;
}

// TM-MFL: every destination tuple, exactly.
inline OracleResult bruteForceTmMfl(const MetricInstance& inst, long long cap = 10000000) {
  const TimeStep& s0 = inst.steps[0];
  const TimeStep& s1 = inst.steps[1];
  const int nF = static_cast<int>(s0.facilities.size());
  const int nX = static_cast<int>(s1.facilities.size());
  long long states = 1;
  for (int f = 0; f < nF; ++f) {
    states *= nX;
    if (states > cap) throw OracleCapExceeded();
  }
  std::vector<int> dest(static_cast<std::size_t>(nF), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> bestDest;
  for (;;) {
    double cost = 0.0;
    std::vector<int> landing;
    landing.reserve(static_cast<std::size_t>(nF));
    for (int f = 0; f < nF; ++f) {
      double w = s0.facility_weights.empty() ? 1.0 : s0.facility_weights[static_cast<std::size_t>(f)];
      int v = s1.facilities[static_cast<std::size_t>(dest[static_cast<std::size_t>(f)])];
      cost += w * inst.d(s0.facilities[static_cast<std::size_t>(f)], v);
      landing.push_back(v);
    }
    for (std::size_t j = 0; j < s1.clients.size(); ++j) {
      double dem = s1.demands.empty() ? 1.0 : s1.demands[j];
      cost += dem * inst.dToSet(s1.clients[j], landing);
    }
    if (cost < best) {
      best = cost;
      bestDest = landing;
    }
    int pos = nF - 1;
    while (pos >= 0 && dest[static_cast<std::size_t>(pos)] == nX - 1) --pos;
    if (pos < 0) break;
    ++dest[static_cast<std::size_t>(pos)];
    for (int q = pos + 1; q < nF; ++q) dest[static_cast<std::size_t>(q)] = 0;
  }
  OracleResult res;
  res.states = states;
  Schedule sched;
  sched.open_sets = {s0.facilities, bestDest};
  std::vector<std::pair<int, int>> moves;
  for (int f = 0; f < nF; ++f)
    moves.emplace_back(s0.facilities[static_cast<std::size_t>(f)], bestDest[static_cast<std::size_t>(f)]);
  sched.transitions.push_back(std::move(moves));
  res.schedule = evaluateSchedule(inst, std::move(sched));
  res.objective = res.schedule.total_cost;
  return res;
}

}  // namespace dynclus
