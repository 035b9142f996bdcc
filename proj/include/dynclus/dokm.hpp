#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dynclus/flow.hpp"
#include "dynclus/lp.hpp"
#include "dynclus/matching.hpp"
#include "dynclus/metric.hpp"
#include "dynclus/rng.hpp"
#include "dynclus/schedule.hpp"
#include "dynclus/threads.hpp"

namespace dynclus {

// ---------------------------------------------------------------------------
// Reduced cost functions.
//
// A guess assigns one distance threshold per distinct weight value and step.
// Thresholds are nonincreasing; a client-facility distance d pays the weight
// of the first threshold at or below it, and nothing if it is below them all.
// ---------------------------------------------------------------------------

struct ReducedCostGuess {
  // thresholds[t][r] pairs with distinct_weights[t][r]; both nonincreasing.
  std::vector<std::vector<double>> thresholds;
  std::vector<std::vector<double>> distinct_weights;

  double reducedCost(int t, double dist) const {
    const auto& thr = thresholds[static_cast<std::size_t>(t)];
    for (std::size_t r = 0; r < thr.size(); ++r)
      if (thr[r] <= dist) return distinct_weights[static_cast<std::size_t>(t)][r] * dist;
    return 0.0;
  }
};

// Rounded weights from Theorem-style perturbation: the head keeps its value,
// mid entries round up to the next power of (1+delta) capped at the head, and
// the tail is lifted to eps*w1/|C|. Output is nonincreasing, >= input, and
// carries O(log) distinct values.
inline std::vector<double> roundWeights(const std::vector<double>& w, double delta, double epsRound) {
  if (w.empty()) return {};
  std::vector<double> out(w.size());
  const double w1 = w[0];
  if (w1 <= 0.0) return std::vector<double>(w.size(), 0.0);
  const double floorVal = epsRound * w1 / static_cast<double>(w.size());
  out[0] = w1;
  for (std::size_t r = 1; r < w.size(); ++r) {
    if (w[r] < floorVal) {
      out[r] = floorVal;
    } else {
      double e = std::ceil(std::log(w[r]) / std::log(1.0 + delta) - 1e-12);
      out[r] = std::min(std::pow(1.0 + delta, e), w1);
    }
  }
  for (std::size_t r = 1; r < out.size(); ++r) out[r] = std::min(out[r], out[r - 1]);
  return out;
}

// ---------------------------------------------------------------------------
// LP(D): variables x (assignment), y (opening), z (movement); objective uses
// the reduced costs on x and the true metric on z. y has no upper bound: an
// optimal schedule may stack several facilities on one location, and parking
// capped mass elsewhere would force spurious movement into the relaxation.
// ---------------------------------------------------------------------------

struct DokmLpLayout {
  std::vector<int> xBase, yBase, zBase; // per step
  std::vector<int> nF, nC;
  int xVar(int t, int i, int j) const {
    return xBase[static_cast<std::size_t>(t)] + i * nC[static_cast<std::size_t>(t)] + j;
  }
  int yVar(int t, int i) const { return yBase[static_cast<std::size_t>(t)] + i; }
  int zVar(int t, int i, int ip) const {
    return zBase[static_cast<std::size_t>(t)] + i * nF[static_cast<std::size_t>(t) + 1] + ip;
  }
};

struct DokmLp {
  LinearProgram lp;
  DokmLpLayout layout;
};

inline DokmLp buildReducedLP(const MetricInstance& inst, const ReducedCostGuess& guess) {
  const int T = inst.T();
  DokmLp out;
  LinearProgram& lp = out.lp;
  DokmLpLayout& L = out.layout;
  for (int t = 0; t < T; ++t) {
    L.nF.push_back(static_cast<int>(inst.steps[static_cast<std::size_t>(t)].facilities.size()));
    L.nC.push_back(static_cast<int>(inst.steps[static_cast<std::size_t>(t)].clients.size()));
  }
  for (int t = 0; t < T; ++t) {
    const TimeStep& s = inst.steps[static_cast<std::size_t>(t)];
    L.xBase.push_back(lp.num_vars);
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i)
      for (int j = 0; j < L.nC[static_cast<std::size_t>(t)]; ++j)
        lp.addVar(guess.reducedCost(t, inst.d(s.facilities[static_cast<std::size_t>(i)],
                                              s.clients[static_cast<std::size_t>(j)])));
    L.yBase.push_back(lp.num_vars);
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i) lp.addVar(0.0);
  }
  for (int t = 0; t + 1 < T; ++t) {
    const TimeStep& s = inst.steps[static_cast<std::size_t>(t)];
    const TimeStep& s2 = inst.steps[static_cast<std::size_t>(t) + 1];
    L.zBase.push_back(lp.num_vars);
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i)
      for (int ip = 0; ip < L.nF[static_cast<std::size_t>(t) + 1]; ++ip)
        lp.addVar(inst.gamma * inst.d(s.facilities[static_cast<std::size_t>(i)],
                                      s2.facilities[static_cast<std::size_t>(ip)]));
  }
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < L.nC[static_cast<std::size_t>(t)]; ++j) {
      std::vector<std::pair<int, double>> row;
      for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i) row.emplace_back(L.xVar(t, i, j), 1.0);
      lp.addRow(std::move(row), Rel::EQ, 1.0);
    }
    std::vector<std::pair<int, double>> krow;
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i) krow.emplace_back(L.yVar(t, i), 1.0);
    lp.addRow(std::move(krow), Rel::EQ, static_cast<double>(inst.k));
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i)
      for (int j = 0; j < L.nC[static_cast<std::size_t>(t)]; ++j)
        lp.addRow({{L.xVar(t, i, j), 1.0}, {L.yVar(t, i), -1.0}}, Rel::LE, 0.0);
  }
  for (int t = 0; t + 1 < T; ++t) {
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i) {
      std::vector<std::pair<int, double>> row{{L.yVar(t, i), -1.0}};
      for (int ip = 0; ip < L.nF[static_cast<std::size_t>(t) + 1]; ++ip) row.emplace_back(L.zVar(t, i, ip), 1.0);
      lp.addRow(std::move(row), Rel::EQ, 0.0);
    }
    for (int ip = 0; ip < L.nF[static_cast<std::size_t>(t) + 1]; ++ip) {
      std::vector<std::pair<int, double>> row{{L.yVar(t + 1, ip), -1.0}};
      for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i) row.emplace_back(L.zVar(t, i, ip), 1.0);
      lp.addRow(std::move(row), Rel::EQ, 0.0);
    }
  }
  return out;
}

// The LP variable triple in dense per-step form.
struct FractionalSolution {
  std::vector<std::vector<std::vector<double>>> x; // x[t][i][j]
  std::vector<std::vector<double>> y;              // y[t][i]
  std::vector<std::vector<std::vector<double>>> z; // z[t][i][ip], t < T-1
};

inline FractionalSolution extractSolution(const MetricInstance& inst, const DokmLpLayout& L,
                                          const LpSolution& sol) {
  const int T = inst.T();
  FractionalSolution fs;
  auto clamp0 = [](double v) { return v < 0 ? 0.0 : v; };
  for (int t = 0; t < T; ++t) {
    fs.x.emplace_back(static_cast<std::size_t>(L.nF[static_cast<std::size_t>(t)]),
                      std::vector<double>(static_cast<std::size_t>(L.nC[static_cast<std::size_t>(t)]), 0.0));
    fs.y.emplace_back(static_cast<std::size_t>(L.nF[static_cast<std::size_t>(t)]), 0.0);
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i) {
      fs.y[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] =
          clamp0(sol.values[static_cast<std::size_t>(L.yVar(t, i))]);
      for (int j = 0; j < L.nC[static_cast<std::size_t>(t)]; ++j)
        fs.x[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            clamp0(sol.values[static_cast<std::size_t>(L.xVar(t, i, j))]);
    }
  }
  for (int t = 0; t + 1 < T; ++t) {
    fs.z.emplace_back(static_cast<std::size_t>(L.nF[static_cast<std::size_t>(t)]),
                      std::vector<double>(static_cast<std::size_t>(L.nF[static_cast<std::size_t>(t) + 1]), 0.0));
    for (int i = 0; i < L.nF[static_cast<std::size_t>(t)]; ++i)
      for (int ip = 0; ip < L.nF[static_cast<std::size_t>(t) + 1]; ++ip)
        fs.z[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)][static_cast<std::size_t>(ip)] =
            clamp0(sol.values[static_cast<std::size_t>(L.zVar(t, i, ip))]);
  }
  return fs;
}

// ---------------------------------------------------------------------------
// Duplication: split every facility into copies so that each positive
// assignment saturates its copy (x in {0, y}) and every copy has y <= 1.
// Movement mass is split proportionally on both ends, which preserves all
// marginals exactly.
// ---------------------------------------------------------------------------

struct FacilityCopy {
  int orig = 0;   // position in steps[t].facilities
  double y = 0.0; // mass of this copy, in (0, 1]
};

struct DuplicatedSolution {
  std::vector<std::vector<FacilityCopy>> copies;   // per step
  std::vector<std::vector<std::vector<double>>> x; // x[t][c][j] in {0, y_c}
  std::vector<std::vector<std::vector<double>>> z; // z[t][c][c2]
};

inline DuplicatedSolution duplicateFacilities(const MetricInstance& inst, const FractionalSolution& fs) {
  const int T = inst.T();
  const double tol = 1e-9;
  DuplicatedSolution dup;
  dup.copies.resize(static_cast<std::size_t>(T));
  dup.x.resize(static_cast<std::size_t>(T));
  std::vector<std::vector<std::vector<int>>> copyOf(static_cast<std::size_t>(T)); // [t][i] -> copy ids

  for (int t = 0; t < T; ++t) {
    const int nF = static_cast<int>(fs.y[static_cast<std::size_t>(t)].size());
    const int nC = fs.x[static_cast<std::size_t>(t)].empty()
                       ? 0
                       : static_cast<int>(fs.x[static_cast<std::size_t>(t)][0].size());
    copyOf[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(nF));
    for (int i = 0; i < nF; ++i) {
      const double yi = fs.y[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      if (yi <= tol) continue;
      // Breakpoints: distinct positive assignment levels, then unit slices of
      // whatever mass remains above the largest level.
      std::vector<double> levels;
      for (int j = 0; j < nC; ++j) {
        double xv = std::min(fs.x[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], yi);
        if (xv > tol) levels.push_back(xv);
      }
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end(),
                               [&](double a, double b) { return std::abs(a - b) <= 1e-8; }),
                   levels.end());
      std::vector<double> cuts; // cumulative upper edges of copies
      for (double v : levels)
        if (v < yi - tol) cuts.push_back(v);
      // Remaining mass above the last cut, sliced into chunks of <= 1.
      double base = cuts.empty() ? 0.0 : cuts.back();
      double rest = yi - base;
      while (rest > 1.0 + tol) {
        base += 1.0;
        cuts.push_back(base);
        rest -= 1.0;
      }
      cuts.push_back(yi);
      double prev = 0.0;
      for (double u : cuts) {
        double mass = u - prev;
        prev = u;
        if (mass <= tol) continue;
        dup.copies[static_cast<std::size_t>(t)].push_back(FacilityCopy{i, mass});
        copyOf[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)].push_back(
            static_cast<int>(dup.copies[static_cast<std::size_t>(t)].size()) - 1);
        dup.x[static_cast<std::size_t>(t)].emplace_back(static_cast<std::size_t>(nC), 0.0);
        auto& xrow = dup.x[static_cast<std::size_t>(t)].back();
        for (int j = 0; j < nC; ++j) {
          double xv = std::min(fs.x[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], yi);
          if (xv >= u - 1e-8) xrow[static_cast<std::size_t>(j)] = mass; // copy fully serves j
        }
      }
    }
  }

  dup.z.resize(static_cast<std::size_t>(std::max(0, T - 1)));
  for (int t = 0; t + 1 < T; ++t) {
    const auto& cs = dup.copies[static_cast<std::size_t>(t)];
    const auto& cs2 = dup.copies[static_cast<std::size_t>(t) + 1];
    dup.z[static_cast<std::size_t>(t)].assign(cs.size(), std::vector<double>(cs2.size(), 0.0));
    // recomputed originals' masses, so the proportional split is exact
    std::vector<double> ymass(fs.y[static_cast<std::size_t>(t)].size(), 0.0);
    std::vector<double> ymass2(fs.y[static_cast<std::size_t>(t) + 1].size(), 0.0);
    for (const auto& c : cs) ymass[static_cast<std::size_t>(c.orig)] += c.y;
    for (const auto& c : cs2) ymass2[static_cast<std::size_t>(c.orig)] += c.y;
    for (std::size_t c = 0; c < cs.size(); ++c)
      for (std::size_t c2 = 0; c2 < cs2.size(); ++c2) {
        double zi = fs.z[static_cast<std::size_t>(t)][static_cast<std::size_t>(cs[c].orig)]
                        [static_cast<std::size_t>(cs2[c2].orig)];
        if (zi <= 0) continue;
        dup.z[static_cast<std::size_t>(t)][c][c2] = zi * (cs[c].y / ymass[static_cast<std::size_t>(cs[c].orig)]) *
                                                    (cs2[c2].y / ymass2[static_cast<std::size_t>(cs2[c2].orig)]);
      }
  }
  return dup;
}

// ---------------------------------------------------------------------------
// Oblivious filtering and matching. Works on one step at a time; knows
// nothing about the weights.
// ---------------------------------------------------------------------------

struct FilterStep {
  std::vector<double> d_av;              // per client position
  std::vector<int> filtered;             // client positions in C', in pick order
  std::vector<int> filterIndex;          // client position -> index into `filtered`, or -1
  std::vector<int> nearest;              // per filtered index: client position of n_j (-1 if alone)
  std::vector<double> radius;            // per filtered index: R_j (inf if alone)
  std::vector<std::vector<int>> bundle;  // per filtered index: copy ids
  std::vector<int> bundleOf;             // copy id -> filtered index or -1
  struct Pair {
    int first;  // filtered index
    int second; // filtered index of n_first, or -1 for singletons
  };
  std::vector<Pair> pairs;
  double bundleMass(int fidx, const std::vector<FacilityCopy>& copies) const {
    double s = 0.0;
    for (int c : bundle[static_cast<std::size_t>(fidx)]) s += copies[static_cast<std::size_t>(c)].y;
    return s;
  }
};

struct FilterOutput {
  std::vector<FilterStep> steps;
};

// Filtering for one step: greedy deletion by average service cost, nearest
// neighbors among survivors, half-distance bundles, then the
// closest-first pairing that always matches a client with its own nearest
// neighbor (singletons allowed).
inline FilterStep filterOneStep(const MetricInstance& inst, const std::vector<int>& clients,
                                const std::vector<int>& facilityPoints,
                                const std::vector<FacilityCopy>& copies,
                                const std::vector<std::vector<double>>& xhat) {
  const int nC = static_cast<int>(clients.size());
  FilterStep out;
  out.d_av.assign(static_cast<std::size_t>(nC), 0.0);
  for (std::size_t c = 0; c < copies.size(); ++c)
    for (int j = 0; j < nC; ++j)
      out.d_av[static_cast<std::size_t>(j)] +=
          inst.d(facilityPoints[static_cast<std::size_t>(copies[c].orig)], clients[static_cast<std::size_t>(j)]) *
          xhat[c][static_cast<std::size_t>(j)];

  std::vector<char> alive(static_cast<std::size_t>(nC), true);
  std::vector<char> inCprime(static_cast<std::size_t>(nC), false);
  int remaining = nC;
  while (remaining > 0) {
    int pick = -1;
    for (int j = 0; j < nC; ++j)
      if (alive[static_cast<std::size_t>(j)] &&
          (pick < 0 || out.d_av[static_cast<std::size_t>(j)] < out.d_av[static_cast<std::size_t>(pick)]))
        pick = j;
    inCprime[static_cast<std::size_t>(pick)] = true;
    out.filtered.push_back(pick);
    alive[static_cast<std::size_t>(pick)] = false;
    --remaining;
    for (int j = 0; j < nC; ++j) {
      if (!alive[static_cast<std::size_t>(j)]) continue;
      if (inst.d(clients[static_cast<std::size_t>(pick)], clients[static_cast<std::size_t>(j)]) <=
          4.0 * out.d_av[static_cast<std::size_t>(pick)]) {
        alive[static_cast<std::size_t>(j)] = false;
        --remaining;
      }
    }
  }

  out.filterIndex.assign(static_cast<std::size_t>(nC), -1);
  for (std::size_t f = 0; f < out.filtered.size(); ++f)
    out.filterIndex[static_cast<std::size_t>(out.filtered[f])] = static_cast<int>(f);

  const int nFjt = static_cast<int>(out.filtered.size());
  out.nearest.assign(static_cast<std::size_t>(nFjt), -1);
  out.radius.assign(static_cast<std::size_t>(nFjt), std::numeric_limits<double>::infinity());
  for (int f = 0; f < nFjt; ++f) {
    int j = out.filtered[static_cast<std::size_t>(f)];
    int best = -1;
    for (int f2 = 0; f2 < nFjt; ++f2) {
      if (f2 == f) continue;
      int j2 = out.filtered[static_cast<std::size_t>(f2)];
      if (best < 0 || inst.d(clients[static_cast<std::size_t>(j)], clients[static_cast<std::size_t>(j2)]) <
                          inst.d(clients[static_cast<std::size_t>(j)], clients[static_cast<std::size_t>(best)]))
        best = j2;
    }
    out.nearest[static_cast<std::size_t>(f)] = best;
    if (best >= 0)
      out.radius[static_cast<std::size_t>(f)] =
          0.5 * inst.d(clients[static_cast<std::size_t>(j)], clients[static_cast<std::size_t>(best)]);
  }

  out.bundle.assign(static_cast<std::size_t>(nFjt), {});
  out.bundleOf.assign(copies.size(), -1);
  for (int f = 0; f < nFjt; ++f) {
    int j = out.filtered[static_cast<std::size_t>(f)];
    for (std::size_t c = 0; c < copies.size(); ++c) {
      if (xhat[c][static_cast<std::size_t>(j)] <= 1e-9) continue; // not in E_j
      double dfj = inst.d(facilityPoints[static_cast<std::size_t>(copies[c].orig)], clients[static_cast<std::size_t>(j)]);
      if (dfj < out.radius[static_cast<std::size_t>(f)]) {
        out.bundle[static_cast<std::size_t>(f)].push_back(static_cast<int>(c));
        if (out.bundleOf[c] != -1) throw std::logic_error("bundles are not disjoint");
        out.bundleOf[c] = f;
      }
    }
  }

  // Pairing: repeatedly take the unmatched client whose nearest neighbor is
  // also unmatched, at minimum pair distance; the rest become singletons.
  std::vector<char> unmatched(static_cast<std::size_t>(nFjt), true);
  for (;;) {
    int pick = -1;
    double pickDist = 0.0;
    for (int f = 0; f < nFjt; ++f) {
      if (!unmatched[static_cast<std::size_t>(f)]) continue;
      int nb = out.nearest[static_cast<std::size_t>(f)];
      if (nb < 0) continue;
      int fn = out.filterIndex[static_cast<std::size_t>(nb)];
      if (!unmatched[static_cast<std::size_t>(fn)]) continue;
      double dd = inst.d(clients[static_cast<std::size_t>(out.filtered[static_cast<std::size_t>(f)])],
                         clients[static_cast<std::size_t>(nb)]);
      if (pick < 0 || dd < pickDist) {
        pick = f;
        pickDist = dd;
      }
    }
    if (pick < 0) break;
    int fn = out.filterIndex[static_cast<std::size_t>(out.nearest[static_cast<std::size_t>(pick)])];
    out.pairs.push_back(FilterStep::Pair{pick, fn});
    unmatched[static_cast<std::size_t>(pick)] = false;
    unmatched[static_cast<std::size_t>(fn)] = false;
  }
  for (int f = 0; f < nFjt; ++f)
    if (unmatched[static_cast<std::size_t>(f)]) out.pairs.push_back(FilterStep::Pair{f, -1});
  return out;
}

inline FilterOutput obliviousFilter(const MetricInstance& inst, const DuplicatedSolution& dup) {
  FilterOutput out;
  for (int t = 0; t < inst.T(); ++t) {
    const TimeStep& s = inst.steps[static_cast<std::size_t>(t)];
    out.steps.push_back(filterOneStep(inst, s.clients, s.facilities, dup.copies[static_cast<std::size_t>(t)],
                                      dup.x[static_cast<std::size_t>(t)]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network embedding (the 6T-layer construction) and rerouting.
// ---------------------------------------------------------------------------

struct DokmNetwork {
  LayeredFlowNetwork net;
  // arc ids, addressed by step and local index
  std::vector<std::vector<int>> facL, facR;       // [t][copy] arcs copy<->bundle, -1 if none
  std::vector<std::vector<int>> bypass;           // [t][copy] L(i)->R(i) arc or -1
  std::vector<std::vector<int>> bundleL, bundleR; // [t][filtered idx] bundle<->pair arcs
  std::vector<std::vector<int>> pairArc;          // [t][pair idx]
  std::vector<std::vector<std::vector<int>>> zArc; // [t][c][c2] or -1
  std::vector<int> sourceArc, sinkArc;            // per copy of first / last step
};

inline int windowSnap(double v) {
  double r = std::round(v);
  return std::abs(v - r) <= 1e-7 ? static_cast<int>(r) : -1; // -1 = genuinely fractional
}

inline DokmNetwork buildDokmNetwork(const MetricInstance& inst, const DuplicatedSolution& dup,
                                    const FilterOutput& filter) {
  const int T = inst.T();
  DokmNetwork D;
  LayeredFlowNetwork& net = D.net;
  net.source = net.addNode(0, NodeTag::Source);
  net.sink = net.addNode(6 * T + 1, NodeTag::Sink);

  std::vector<std::vector<int>> nodeL(static_cast<std::size_t>(T)), nodeR(static_cast<std::size_t>(T));
  std::vector<std::vector<int>> nodeBL(static_cast<std::size_t>(T)), nodeBR(static_cast<std::size_t>(T));
  std::vector<std::vector<int>> nodePL(static_cast<std::size_t>(T)), nodePR(static_cast<std::size_t>(T));
  D.facL.resize(static_cast<std::size_t>(T));
  D.facR.resize(static_cast<std::size_t>(T));
  D.bypass.resize(static_cast<std::size_t>(T));
  D.bundleL.resize(static_cast<std::size_t>(T));
  D.bundleR.resize(static_cast<std::size_t>(T));
  D.pairArc.resize(static_cast<std::size_t>(T));
  D.zArc.resize(static_cast<std::size_t>(std::max(0, T - 1)));

  for (int t = 0; t < T; ++t) {
    const auto& copies = dup.copies[static_cast<std::size_t>(t)];
    const FilterStep& fs = filter.steps[static_cast<std::size_t>(t)];
    const int base = 6 * t + 1;
    for (std::size_t c = 0; c < copies.size(); ++c) {
      nodeL[static_cast<std::size_t>(t)].push_back(net.addNode(base, NodeTag::FacilityL, static_cast<int>(c)));
      nodeR[static_cast<std::size_t>(t)].push_back(net.addNode(base + 5, NodeTag::FacilityR, static_cast<int>(c)));
    }
    for (std::size_t f = 0; f < fs.filtered.size(); ++f) {
      nodeBL[static_cast<std::size_t>(t)].push_back(net.addNode(base + 1, NodeTag::BundleL, static_cast<int>(f)));
      nodeBR[static_cast<std::size_t>(t)].push_back(net.addNode(base + 4, NodeTag::BundleR, static_cast<int>(f)));
    }
    for (std::size_t p = 0; p < fs.pairs.size(); ++p) {
      nodePL[static_cast<std::size_t>(t)].push_back(net.addNode(base + 2, NodeTag::PairL, static_cast<int>(p)));
      nodePR[static_cast<std::size_t>(t)].push_back(net.addNode(base + 3, NodeTag::PairR, static_cast<int>(p)));
    }

    D.facL[static_cast<std::size_t>(t)].assign(copies.size(), -1);
    D.facR[static_cast<std::size_t>(t)].assign(copies.size(), -1);
    D.bypass[static_cast<std::size_t>(t)].assign(copies.size(), -1);

    // items 4-5: bundle <-> pair and pair bridge arcs with rounded windows
    D.bundleL[static_cast<std::size_t>(t)].assign(fs.filtered.size(), -1);
    D.bundleR[static_cast<std::size_t>(t)].assign(fs.filtered.size(), -1);
    std::vector<int> pairOf(fs.filtered.size(), -1);
    for (std::size_t p = 0; p < fs.pairs.size(); ++p) {
      pairOf[static_cast<std::size_t>(fs.pairs[p].first)] = static_cast<int>(p);
      if (fs.pairs[p].second >= 0) pairOf[static_cast<std::size_t>(fs.pairs[p].second)] = static_cast<int>(p);
    }
    for (std::size_t f = 0; f < fs.filtered.size(); ++f) {
      double mass = fs.bundleMass(static_cast<int>(f), copies);
      int snapped = windowSnap(mass);
      int lo = snapped >= 0 ? snapped : static_cast<int>(std::floor(mass));
      int hi = snapped >= 0 ? snapped : static_cast<int>(std::ceil(mass));
      int p = pairOf[f];
      D.bundleL[static_cast<std::size_t>(t)][f] =
          net.addArc(nodeBL[static_cast<std::size_t>(t)][f], nodePL[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)], lo, hi, mass);
      D.bundleR[static_cast<std::size_t>(t)][f] =
          net.addArc(nodePR[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)], nodeBR[static_cast<std::size_t>(t)][f], lo, hi, mass);
    }
    for (std::size_t p = 0; p < fs.pairs.size(); ++p) {
      double mass = fs.bundleMass(fs.pairs[p].first, copies);
      if (fs.pairs[p].second >= 0) mass += fs.bundleMass(fs.pairs[p].second, copies);
      int snapped = windowSnap(mass);
      int lo = snapped >= 0 ? snapped : static_cast<int>(std::floor(mass));
      int hi = snapped >= 0 ? snapped : static_cast<int>(std::ceil(mass));
      D.pairArc[static_cast<std::size_t>(t)].push_back(
          net.addArc(nodePL[static_cast<std::size_t>(t)][p], nodePR[static_cast<std::size_t>(t)][p], lo, hi, mass));
    }

    // items 6-7: facility arcs into bundles, or a bypass across the middle
    for (std::size_t c = 0; c < copies.size(); ++c) {
      int f = fs.bundleOf[c];
      if (f >= 0) {
        D.facL[static_cast<std::size_t>(t)][c] =
            net.addArc(nodeL[static_cast<std::size_t>(t)][c], nodeBL[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)], 0, 1, copies[c].y);
        D.facR[static_cast<std::size_t>(t)][c] =
            net.addArc(nodeBR[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)], nodeR[static_cast<std::size_t>(t)][c], 0, 1, copies[c].y);
      } else {
        D.bypass[static_cast<std::size_t>(t)][c] =
            net.addArc(nodeL[static_cast<std::size_t>(t)][c], nodeR[static_cast<std::size_t>(t)][c], 0, 1, copies[c].y);
      }
    }
  }

  // item 8: movement arcs between neighboring steps
  for (int t = 0; t + 1 < T; ++t) {
    const auto& cs = dup.copies[static_cast<std::size_t>(t)];
    const auto& cs2 = dup.copies[static_cast<std::size_t>(t) + 1];
    D.zArc[static_cast<std::size_t>(t)].assign(cs.size(), std::vector<int>(cs2.size(), -1));
    for (std::size_t c = 0; c < cs.size(); ++c)
      for (std::size_t c2 = 0; c2 < cs2.size(); ++c2) {
        double zf = dup.z[static_cast<std::size_t>(t)][c][c2];
        D.zArc[static_cast<std::size_t>(t)][c][c2] =
            net.addArc(nodeR[static_cast<std::size_t>(t)][c], nodeL[static_cast<std::size_t>(t) + 1][c2], 0, 1, zf);
      }
  }

  for (std::size_t c = 0; c < dup.copies[0].size(); ++c)
    D.sourceArc.push_back(net.addArc(net.source, nodeL[0][c], 0, 1, dup.copies[0][c].y));
  for (std::size_t c = 0; c < dup.copies[static_cast<std::size_t>(T - 1)].size(); ++c)
    D.sinkArc.push_back(net.addArc(nodeR[static_cast<std::size_t>(T - 1)][c], net.sink, 0, 1,
                                   dup.copies[static_cast<std::size_t>(T - 1)][c].y));
  net.validateFlow();
  return D;
}

// Facility selection from the rounded flow. For T = 2 the open sets and the
// transition are read straight off the unit arcs between layers 6 and 7. For
// T >= 3 each pair's one or two flow units pick facilities by the Algorithm-2
// case analysis, and untouched bypass facilities join as-is.
inline std::vector<std::vector<int>> reroute(const MetricInstance& inst, const IntegralFlow& fbar,
                                             const DokmNetwork& D, const DuplicatedSolution& dup,
                                             const FilterOutput& filter,
                                             std::vector<std::pair<int, int>>* t2moves = nullptr) {
  const int T = inst.T();
  std::vector<std::vector<int>> A(static_cast<std::size_t>(T));
  auto origPoint = [&](int t, int c) {
    return inst.steps[static_cast<std::size_t>(t)]
        .facilities[static_cast<std::size_t>(dup.copies[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)].orig)];
  };

  if (T == 2) {
    for (std::size_t c = 0; c < dup.copies[0].size(); ++c)
      for (std::size_t c2 = 0; c2 < dup.copies[1].size(); ++c2) {
        int a = D.zArc[0][c][c2];
        if (a >= 0 && fbar.values[static_cast<std::size_t>(a)] == 1) {
          A[0].push_back(origPoint(0, static_cast<int>(c)));
          A[1].push_back(origPoint(1, static_cast<int>(c2)));
          if (t2moves)
            t2moves->emplace_back(origPoint(0, static_cast<int>(c)), origPoint(1, static_cast<int>(c2)));
        }
      }
    return A;
  }

  for (int t = 0; t < T; ++t) {
    const FilterStep& fs = filter.steps[static_cast<std::size_t>(t)];
    const auto& copies = dup.copies[static_cast<std::size_t>(t)];
    auto unitCopyL = [&](int f) { // the copy feeding bundle f on the left side
      for (int c : fs.bundle[static_cast<std::size_t>(f)])
        if (fbar.values[static_cast<std::size_t>(D.facL[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)])] == 1)
          return c;
      throw FlowError("no unit flow enters the bundle on the left");
    };
    auto unitCopyR = [&](int f) {
      for (int c : fs.bundle[static_cast<std::size_t>(f)])
        if (fbar.values[static_cast<std::size_t>(D.facR[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)])] == 1)
          return c;
      throw FlowError("no unit flow leaves the bundle on the right");
    };
    auto bundleFlowL = [&](int f) {
      return fbar.values[static_cast<std::size_t>(D.bundleL[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)])];
    };
    auto bundleFlowR = [&](int f) {
      return fbar.values[static_cast<std::size_t>(D.bundleR[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)])];
    };

    for (std::size_t p = 0; p < fs.pairs.size(); ++p) {
      const int v = fbar.values[static_cast<std::size_t>(D.pairArc[static_cast<std::size_t>(t)][p])];
      if (v == 0) continue;
      const int f1 = fs.pairs[p].first;
      const int f2 = fs.pairs[p].second;
      if (v == 2) {
        A[static_cast<std::size_t>(t)].push_back(origPoint(t, unitCopyL(f1)));
        A[static_cast<std::size_t>(t)].push_back(origPoint(t, unitCopyL(f2)));
        continue;
      }
      if (f2 < 0) { // singleton: always the left-side facility
        A[static_cast<std::size_t>(t)].push_back(origPoint(t, unitCopyL(f1)));
        continue;
      }
      const int jL = bundleFlowL(f1) == 1 ? f1 : f2;
      const int jR = bundleFlowR(f1) == 1 ? f1 : f2;
      const int n2 = fs.nearest[static_cast<std::size_t>(f2)];
      const bool mutual = n2 == fs.filtered[static_cast<std::size_t>(f1)];
      if (mutual || jL == jR) {
        A[static_cast<std::size_t>(t)].push_back(origPoint(t, unitCopyL(jL)));
      } else if (jL == f2) {
        A[static_cast<std::size_t>(t)].push_back(origPoint(t, unitCopyL(f2)));
      } else {
        A[static_cast<std::size_t>(t)].push_back(origPoint(t, unitCopyR(f2)));
      }
    }
    for (std::size_t c = 0; c < copies.size(); ++c) {
      int a = D.bypass[static_cast<std::size_t>(t)][c];
      if (a >= 0 && fbar.values[static_cast<std::size_t>(a)] == 1)
        A[static_cast<std::size_t>(t)].push_back(origPoint(t, static_cast<int>(c)));
    }
  }
  return A;
}

// ---------------------------------------------------------------------------
// Threshold enumeration and the driver.
// ---------------------------------------------------------------------------

struct DokmOptions {
  double delta = 0.5;
  int samples = 200;
  std::uint64_t seed = 0;
  long max_guesses = 100000;
  int threads = 0; // 0 = decide from DYNCLUS_THREADS / hardware
};

struct DokmResult {
  Schedule schedule;
  long num_guesses = 0;
  bool truncated = false;
  long best_guess = -1;
  int best_sample = -1;
  double best_lp_value = 0.0;
  double min_lp_value = std::numeric_limits<double>::infinity();
  double certified_factor = 0.0;
  bool weight_warning = false; // T >= 3 with weights not bounded away from 0
};

namespace detail {

// All nonincreasing tuples of the given length over the candidate values
// (candidates ascending). Tuple count is C(m+len-1, len).
inline void enumerateTuples(const std::vector<double>& cands, int len,
                            std::vector<std::vector<double>>& out) {
  std::vector<int> idx(static_cast<std::size_t>(len), static_cast<int>(cands.size()) - 1);
  if (len == 0) {
    out.push_back({});
    return;
  }
  for (;;) {
    std::vector<double> tup;
    tup.reserve(static_cast<std::size_t>(len));
    for (int r = 0; r < len; ++r) tup.push_back(cands[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])]);
    out.push_back(std::move(tup));
    int pos = len - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == 0) --pos;
    if (pos < 0) break;
    int nv = idx[static_cast<std::size_t>(pos)] - 1;
    for (int r = pos; r < len; ++r) idx[static_cast<std::size_t>(r)] = nv; // keep nonincreasing
  }
}

}  // namespace detail

// Distinct realized client-facility distances of a step, plus zero.
inline std::vector<double> thresholdCandidates(const MetricInstance& inst, int t) {
  std::vector<double> c{0.0};
  for (int i : inst.steps[static_cast<std::size_t>(t)].facilities)
    for (int j : inst.steps[static_cast<std::size_t>(t)].clients) c.push_back(inst.d(i, j));
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

struct GuessSpace {
  std::vector<std::vector<std::vector<double>>> perStep; // [t][tupleIdx] -> thresholds
  std::vector<std::vector<double>> distinctWeights;      // [t] nonincreasing distinct values
  long total = 0;

  ReducedCostGuess guessAt(long g) const {
    ReducedCostGuess guess;
    guess.distinct_weights = distinctWeights;
    long rem = g;
    for (std::size_t t = 0; t < perStep.size(); ++t) {
      long m = static_cast<long>(perStep[t].size());
      guess.thresholds.push_back(perStep[t][static_cast<std::size_t>(rem % m)]);
      rem /= m;
    }
    return guess;
  }
};

inline GuessSpace buildGuessSpace(const MetricInstance& inst,
                                  const std::vector<std::vector<double>>& roundedWeights) {
  GuessSpace gs;
  gs.total = 1;
  for (int t = 0; t < inst.T(); ++t) {
    std::vector<double> distinct;
    for (double w : roundedWeights[static_cast<std::size_t>(t)])
      if (distinct.empty() || w < distinct.back() - 1e-15) distinct.push_back(w);
    gs.distinctWeights.push_back(distinct);
    std::vector<std::vector<double>> tuples;
    detail::enumerateTuples(thresholdCandidates(inst, t), static_cast<int>(distinct.size()), tuples);
    gs.total *= static_cast<long>(tuples.size());
    gs.perStep.push_back(std::move(tuples));
  }
  return gs;
}

// One guess end to end: LP, duplication, filtering, network. Exposed so the
// test suites can audit each stage.
struct GuessPipeline {
  LpSolution lp;
  FractionalSolution fractional;
  DuplicatedSolution dup;
  FilterOutput filter;
  DokmNetwork network;
};

inline GuessPipeline runGuessPipeline(const MetricInstance& inst, const ReducedCostGuess& guess) {
  GuessPipeline P;
  DokmLp built = buildReducedLP(inst, guess);
  P.lp = solveLP(built.lp);
  P.fractional = extractSolution(inst, built.layout, P.lp);
  P.dup = duplicateFacilities(inst, P.fractional);
  P.filter = obliviousFilter(inst, P.dup);
  P.network = buildDokmNetwork(inst, P.dup, P.filter);
  return P;
}

inline DokmResult solveDokm(const MetricInstance& inst, const DokmOptions& opt) {
  if (inst.kind != ProblemKind::dokm) throw std::invalid_argument("solveDokm: wrong problem kind");
  const int T = inst.T();
  if (T < 2) throw std::invalid_argument("solveDokm: needs at least two time steps");

  DokmResult res;
  double minWeight = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> weights;
  for (const TimeStep& s : inst.steps) {
    std::vector<double> w = s.weights;
    if (w.empty()) w.assign(s.clients.size(), 1.0);
    for (double v : w) minWeight = std::min(minWeight, v);
    weights.push_back(std::move(w));
  }
  if (T >= 3 && !(minWeight > 0)) res.weight_warning = true;

  // The epsilon inside the rounding formula controls only how far the tail is
  // lifted; tying it to delta keeps the overall inflation within (1+delta).
  std::vector<std::vector<double>> rounded;
  for (auto& w : weights) rounded.push_back(roundWeights(w, opt.delta, opt.delta));

  GuessSpace gs = buildGuessSpace(inst, rounded);
  long limit = gs.total;
  if (opt.max_guesses > 0 && gs.total > opt.max_guesses) {
    limit = opt.max_guesses;
    res.truncated = true;
  }
  res.num_guesses = limit;

  struct Best {
    double cost = std::numeric_limits<double>::infinity();
    long guess = -1;
    int sample = -1;
    Schedule sched;
    double lpValue = 0.0;
    double minLp = std::numeric_limits<double>::infinity();
  };
  const int nThreads = std::max(1, std::min<long>(resolveThreads(opt.threads), limit));
  std::vector<Best> perThread(static_cast<std::size_t>(nThreads));
  std::atomic<long> next{0};

  auto worker = [&](int tid) {
    Best& best = perThread[static_cast<std::size_t>(tid)];
    for (;;) {
      long g = next.fetch_add(1);
      if (g >= limit) return;
      ReducedCostGuess guess = gs.guessAt(g);
      GuessPipeline P;
      try {
        P = runGuessPipeline(inst, guess);
      } catch (const LpError&) {
        continue; // defensive: LP(D) is feasible by construction
      }
      best.minLp = std::min(best.minLp, P.lp.objective_value);
      Rng rng(deriveSeed(opt.seed, static_cast<std::uint64_t>(g)));
      for (int s = 0; s < opt.samples; ++s) {
        IntegralFlow fbar = dependentRoundFlow(P.network.net, rng.nextU64());
        Schedule sched;
        std::vector<std::pair<int, int>> moves;
        sched.open_sets = reroute(inst, fbar, P.network, P.dup, P.filter, T == 2 ? &moves : nullptr);
        if (T == 2) sched.transitions.push_back(std::move(moves));
        sched = evaluateSchedule(inst, std::move(sched));
        if (sched.total_cost < best.cost ||
            (sched.total_cost == best.cost && (g < best.guess || (g == best.guess && s < best.sample)))) {
          best.cost = sched.total_cost;
          best.guess = g;
          best.sample = s;
          best.sched = sched;
          best.lpValue = P.lp.objective_value;
        }
      }
    }
  };

  if (nThreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int tid = 0; tid < nThreads; ++tid) pool.emplace_back(worker, tid);
    for (auto& th : pool) th.join();
  }

  Best best;
  for (const Best& b : perThread) {
    best.minLp = std::min(best.minLp, b.minLp);
    if (b.guess < 0) continue;
    if (b.cost < best.cost || (b.cost == best.cost && (b.guess < best.guess || (b.guess == best.guess && b.sample < best.sample)))) {
      best.cost = b.cost;
      best.guess = b.guess;
      best.sample = b.sample;
      best.sched = b.sched;
      best.lpValue = b.lpValue;
    }
  }
  if (best.guess < 0) throw std::runtime_error("solveDokm: no schedule produced");

  res.schedule = best.sched;
  res.best_guess = best.guess;
  res.best_sample = best.sample;
  res.best_lp_value = best.lpValue;
  res.min_lp_value = best.minLp;
  const double base = 48.0 + 20.0 * std::sqrt(3.0);
  if (T == 2)
    res.certified_factor = base * (1.0 + opt.delta);
  else if (minWeight > 0)
    res.certified_factor = (base + 6.0 * inst.gamma / minWeight) * (1.0 + opt.delta);
  else
    res.certified_factor = std::numeric_limits<double>::infinity();
  return res;
}

}  // namespace dynclus
