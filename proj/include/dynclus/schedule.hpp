#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dynclus/matching.hpp"
#include "dynclus/metric.hpp"

namespace dynclus {

// A solution: one facility multiset per step (point ids, |A_t| = k) and one
// bijection per transition, stored as point-id pairs. Costs are filled in by
// evaluateSchedule.
struct Schedule {
  std::vector<std::vector<int>> open_sets;
  std::vector<std::vector<std::pair<int, int>>> transitions;
  double service_cost = 0.0;
  double movement_cost = 0.0;
  double total_cost = 0.0;
};

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool isMultiSubset(std::vector<int> sub, std::vector<int> super) {
  std::sort(sub.begin(), sub.end());
  std::sort(super.begin(), super.end());
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

// Checks that `moves` is a bijection between the multisets A and A2.
inline void checkTransition(const std::vector<std::pair<int, int>>& moves, std::vector<int> A,
                            std::vector<int> A2) {
  if (moves.size() != A.size()) throw ScheduleError("transition size mismatch");
  std::vector<int> from, to;
  for (auto& m : moves) {
    from.push_back(m.first);
    to.push_back(m.second);
  }
  std::sort(from.begin(), from.end());
  std::sort(to.begin(), to.end());
  std::sort(A.begin(), A.end());
  std::sort(A2.begin(), A2.end());
  if (from != A || to != A2) throw ScheduleError("transition is not a bijection between open sets");
}

}  // namespace detail

// Evaluates Eq.-style total cost: ordered service plus gamma-scaled minimum
// matching movement. For dks kinds the service field instead reports the
// realized covering radius and the movement field the worst transition hop
// (so the B-constraint can be read off directly). Structural checks: every
// A_t is a size-k multiset drawn from F_t; provided transitions must be
// bijections. Missing transitions are filled in (minimum-weight matching for
// cost kinds, bottleneck matching for dks kinds).
inline Schedule evaluateSchedule(const MetricInstance& inst, Schedule sched) {
  const int T = inst.T();
  if (static_cast<int>(sched.open_sets.size()) != T) throw ScheduleError("wrong number of open sets");
  for (int t = 0; t < T; ++t) {
    const auto& A = sched.open_sets[static_cast<std::size_t>(t)];
    if (static_cast<int>(A.size()) != inst.k) throw ScheduleError("|A_t| != k");
    if (!detail::isMultiSubset(A, inst.steps[static_cast<std::size_t>(t)].facilities))
      throw ScheduleError("A_t not contained in F_t");
  }
  if (!sched.transitions.empty() && static_cast<int>(sched.transitions.size()) != T - 1)
    throw ScheduleError("wrong number of transitions");

  const bool isDks = inst.kind == ProblemKind::dks || inst.kind == ProblemKind::dks_outlier;
  const bool fill = sched.transitions.empty();
  if (fill) sched.transitions.resize(static_cast<std::size_t>(std::max(0, T - 1)));

  double movement = 0.0;
  double worstHop = 0.0;
  for (int t = 0; t + 1 < T; ++t) {
    const auto& A = sched.open_sets[static_cast<std::size_t>(t)];
    const auto& A2 = sched.open_sets[static_cast<std::size_t>(t) + 1];
    auto& moves = sched.transitions[static_cast<std::size_t>(t)];
    if (fill) {
      MatchingResult m = isDks ? bottleneckMatching(inst, A, A2) : minMatchingCost(inst, A, A2);
      for (std::size_t a = 0; a < A.size(); ++a)
        moves.emplace_back(A[a], A2[static_cast<std::size_t>(m.assignment[a])]);
    } else {
      detail::checkTransition(moves, A, A2);
    }
    for (auto& mv : moves) {
      movement += inst.d(mv.first, mv.second);
      worstHop = std::max(worstHop, inst.d(mv.first, mv.second));
    }
  }

  if (inst.kind == ProblemKind::dokm) {
    double service = 0.0;
    for (int t = 0; t < T; ++t) {
      const TimeStep& s = inst.steps[static_cast<std::size_t>(t)];
      std::vector<double> D;
      D.reserve(s.clients.size());
      for (int j : s.clients) D.push_back(inst.dToSet(j, sched.open_sets[static_cast<std::size_t>(t)]));
      std::vector<double> w = s.weights;
      if (w.empty()) w.assign(s.clients.size(), 1.0); // plain k-median default
      service += orderedCost(w, D);
    }
    sched.service_cost = service;
    sched.movement_cost = inst.gamma * movement;
  } else if (inst.kind == ProblemKind::tm_mfl) {
    // Step 0 holds the weighted facilities, step 1 the demand-weighted
    // clients; movement is facility-weight scaled along the stored bijection.
    const TimeStep& s0 = inst.steps[0];
    const TimeStep& s1 = inst.steps[1];
    double service = 0.0;
    for (std::size_t c = 0; c < s1.clients.size(); ++c) {
      double dem = s1.demands.empty() ? 1.0 : s1.demands[c];
      service += dem * inst.dToSet(s1.clients[c], sched.open_sets[1]);
    }
    double wmove = 0.0;
    const auto& moves = sched.transitions[0];
    // The bijection must start exactly at the facility list so each hop can
    // carry that facility's weight.
    std::vector<char> used(moves.size(), false);
    for (std::size_t m = 0; m < s0.facilities.size(); ++m) {
      bool found = false;
      for (std::size_t q = 0; q < moves.size(); ++q) {
        if (!used[q] && moves[q].first == s0.facilities[m]) {
          double w = s0.facility_weights.empty() ? 1.0 : s0.facility_weights[m];
          wmove += w * inst.d(moves[q].first, moves[q].second);
          used[q] = true;
          found = true;
          break;
        }
      }
      if (!found) throw ScheduleError("tm_mfl transition does not start at the facility set");
    }
    sched.service_cost = service;
    sched.movement_cost = wmove;
  } else {
    double radius = 0.0;
    for (int t = 0; t < T; ++t)
      for (int j : inst.steps[static_cast<std::size_t>(t)].clients)
        radius = std::max(radius, inst.dToSet(j, sched.open_sets[static_cast<std::size_t>(t)]));
    sched.service_cost = radius;
    sched.movement_cost = worstHop;
  }
  sched.total_cost = sched.service_cost + sched.movement_cost;
  return sched;
}

}  // namespace dynclus
