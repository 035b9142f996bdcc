#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dynclus/dokm.hpp"
#include "dynclus/flow.hpp"
#include "dynclus/lp.hpp"
#include "dynclus/metric.hpp"
#include "dynclus/rng.hpp"
#include "dynclus/schedule.hpp"

namespace dynclus {

// Facility-weighted minimum total-movement mobile facility location, solved
// as a two-step instance whose first step holds the fixed weighted starts.
// Expected layout: steps[0] = facilities with weights, no clients;
// steps[1] = demand-weighted clients plus the candidate destination set.

struct TmMflLp {
  LinearProgram lp;
  int nF = 0, nX = 0, nC = 0;
  int xVar(int i, int j) const { return i * nC + j; }
  int yVar(int i) const { return nX * nC + i; }
  int zVar(int f, int i) const { return nX * nC + nX + f * nX + i; }
};

inline TmMflLp buildTmMflLP(const MetricInstance& inst) {
  const TimeStep& s0 = inst.steps[0];
  const TimeStep& s1 = inst.steps[1];
  TmMflLp out;
  out.nF = static_cast<int>(s0.facilities.size());
  out.nX = static_cast<int>(s1.facilities.size());
  out.nC = static_cast<int>(s1.clients.size());
  LinearProgram& lp = out.lp;
  for (int i = 0; i < out.nX; ++i)
    for (int j = 0; j < out.nC; ++j) {
      double dem = s1.demands.empty() ? 1.0 : s1.demands[static_cast<std::size_t>(j)];
      lp.addVar(dem * inst.d(s1.facilities[static_cast<std::size_t>(i)], s1.clients[static_cast<std::size_t>(j)]));
    }
  for (int i = 0; i < out.nX; ++i) lp.addVar(0.0, 0.0, 1.0); // y <= 1: destinations never stack
  for (int f = 0; f < out.nF; ++f)
    for (int i = 0; i < out.nX; ++i) {
      double w = s0.facility_weights.empty() ? 1.0 : s0.facility_weights[static_cast<std::size_t>(f)];
      lp.addVar(w * inst.d(s0.facilities[static_cast<std::size_t>(f)], s1.facilities[static_cast<std::size_t>(i)]));
    }
  for (int j = 0; j < out.nC; ++j) {
    std::vector<std::pair<int, double>> row;
    for (int i = 0; i < out.nX; ++i) row.emplace_back(out.xVar(i, j), 1.0);
    lp.addRow(std::move(row), Rel::EQ, 1.0);
  }
  for (int f = 0; f < out.nF; ++f) {
    std::vector<std::pair<int, double>> row;
    for (int i = 0; i < out.nX; ++i) row.emplace_back(out.zVar(f, i), 1.0);
    lp.addRow(std::move(row), Rel::EQ, 1.0);
  }
  for (int i = 0; i < out.nX; ++i) {
    std::vector<std::pair<int, double>> row{{out.yVar(i), -1.0}};
    for (int f = 0; f < out.nF; ++f) row.emplace_back(out.zVar(f, i), 1.0);
    lp.addRow(std::move(row), Rel::EQ, 0.0);
  }
  for (int i = 0; i < out.nX; ++i)
    for (int j = 0; j < out.nC; ++j)
      lp.addRow({{out.xVar(i, j), 1.0}, {out.yVar(i), -1.0}}, Rel::LE, 0.0);
  return out;
}

struct TmMflResult {
  Schedule schedule;
  double lp_value = 0.0;
  int best_sample = -1;
};

inline TmMflResult solveTmMfl(const MetricInstance& inst, int samples = 64, std::uint64_t seed = 0) {
  if (inst.kind != ProblemKind::tm_mfl) throw std::invalid_argument("solveTmMfl: wrong problem kind");
  if (inst.T() != 2) throw std::invalid_argument("solveTmMfl: expected 2 steps (starts, clients)");
  const TimeStep& s0 = inst.steps[0];
  const TimeStep& s1 = inst.steps[1];
  if (!s0.clients.empty()) throw std::invalid_argument("solveTmMfl: step 0 must have no clients");
  const int nF = static_cast<int>(s0.facilities.size());
  if (inst.k != nF) throw std::invalid_argument("solveTmMfl: k must equal the facility count");

  TmMflLp built = buildTmMflLP(inst);
  LpSolution sol = solveLP(built.lp);

  // Cast as a two-step fractional solution: step 0 fixes one unit per start.
  FractionalSolution fs;
  fs.x.resize(2);
  fs.y.resize(2);
  fs.z.resize(1);
  fs.x[0].assign(static_cast<std::size_t>(nF), {});
  fs.y[0].assign(static_cast<std::size_t>(nF), 1.0);
  fs.x[1].assign(static_cast<std::size_t>(built.nX), std::vector<double>(static_cast<std::size_t>(built.nC), 0.0));
  fs.y[1].assign(static_cast<std::size_t>(built.nX), 0.0);
  fs.z[0].assign(static_cast<std::size_t>(nF), std::vector<double>(static_cast<std::size_t>(built.nX), 0.0));
  auto clamp0 = [](double v) { return v < 0 ? 0.0 : v; };
  for (int i = 0; i < built.nX; ++i) {
    fs.y[1][static_cast<std::size_t>(i)] = clamp0(sol.values[static_cast<std::size_t>(built.yVar(i))]);
    for (int j = 0; j < built.nC; ++j)
      fs.x[1][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          clamp0(sol.values[static_cast<std::size_t>(built.xVar(i, j))]);
  }
  for (int f = 0; f < nF; ++f)
    for (int i = 0; i < built.nX; ++i)
      fs.z[0][static_cast<std::size_t>(f)][static_cast<std::size_t>(i)] =
          clamp0(sol.values[static_cast<std::size_t>(built.zVar(f, i))]);

  DuplicatedSolution dup = duplicateFacilities(inst, fs);
  FilterOutput filter = obliviousFilter(inst, dup);
  DokmNetwork net = buildDokmNetwork(inst, dup, filter);

  // Step-0 copies are one-per-facility with unit mass.
  if (dup.copies[0].size() != static_cast<std::size_t>(nF))
    throw std::logic_error("tm_mfl: unexpected start duplication");

  TmMflResult res;
  res.lp_value = sol.objective_value;
  double best = std::numeric_limits<double>::infinity();
  Rng rng(deriveSeed(seed, 0));
  for (int smp = 0; smp < samples; ++smp) {
    IntegralFlow fbar = dependentRoundFlow(net.net, rng.nextU64());
    // Landing point of each facility = the arc it sends its unit across.
    std::vector<int> dest(static_cast<std::size_t>(nF), -1);
    for (int f = 0; f < nF; ++f) {
      // step-0 copies are one per facility in facility order, so copy id == f
      for (std::size_t c2 = 0; c2 < dup.copies[1].size(); ++c2) {
        int a = net.zArc[0][static_cast<std::size_t>(f)][c2];
        if (a >= 0 && fbar.values[static_cast<std::size_t>(a)] == 1) {
          dest[static_cast<std::size_t>(f)] =
              s1.facilities[static_cast<std::size_t>(dup.copies[1][c2].orig)];
          break;
        }
      }
      if (dest[static_cast<std::size_t>(f)] < 0) throw FlowError("tm_mfl: facility lost its unit of flow");
    }
    // Cancel redundant moves until landing spots are pairwise distinct.
    for (;;) {
      bool changed = false;
      for (int f = 0; f < nF && !changed; ++f) {
        int u = dest[static_cast<std::size_t>(f)];
        int dupCount = 0;
        for (int f2 = 0; f2 < nF; ++f2)
          if (dest[static_cast<std::size_t>(f2)] == u) ++dupCount;
        if (dupCount >= 2 && s0.facilities[static_cast<std::size_t>(f)] != u) {
          dest[static_cast<std::size_t>(f)] = s0.facilities[static_cast<std::size_t>(f)];
          changed = true;
        }
      }
      if (!changed) break;
    }

    Schedule sched;
    sched.open_sets.push_back(s0.facilities);
    sched.open_sets.push_back(dest);
    std::vector<std::pair<int, int>> moves;
    for (int f = 0; f < nF; ++f)
      moves.emplace_back(s0.facilities[static_cast<std::size_t>(f)], dest[static_cast<std::size_t>(f)]);
    sched.transitions.push_back(std::move(moves));
    sched = evaluateSchedule(inst, std::move(sched));
    if (sched.total_cost < best) {
      best = sched.total_cost;
      res.schedule = sched;
      res.best_sample = smp;
    }
  }
  return res;
}

}  // namespace dynclus
