#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dynclus/flow.hpp"
#include "dynclus/metric.hpp"
#include "dynclus/schedule.hpp"

namespace dynclus {

class TooManyClusters : public std::runtime_error {
 public:
  TooManyClusters() : std::runtime_error("more than k clusters form; radius guess too small") {}
};

struct ClusterResult {
  std::vector<int> representatives;   // point ids, in pick order
  std::vector<int> assignment;        // per client position: representative index
};

// Greedy 2R-separated representatives, scanning clients in input order. Each
// removed client is assigned to the representative that removed it.
inline ClusterResult buildClusters(const MetricInstance& inst, const std::vector<int>& clients,
                                   double R, int k) {
  ClusterResult out;
  out.assignment.assign(clients.size(), -1);
  for (std::size_t j = 0; j < clients.size(); ++j) {
    if (out.assignment[j] != -1) continue;
    int rep = static_cast<int>(out.representatives.size());
    out.representatives.push_back(clients[j]);
    if (static_cast<int>(out.representatives.size()) > k) throw TooManyClusters();
    for (std::size_t j2 = j; j2 < clients.size(); ++j2)
      if (out.assignment[j2] == -1 && inst.d(clients[j], clients[j2]) <= 2.0 * R + 1e-12)
        out.assignment[j2] = rep;
  }
  return out;
}

struct DksNetwork {
  LayeredFlowNetwork net;
  ClusterResult clusters1, clusters2;
  int dummies1 = 0, dummies2 = 0;
  std::vector<int> f1Nodes, f2Nodes;               // node ids per facility position
  std::vector<std::vector<int>> crossArc;          // [i][i2] arc id or -1
};

// Four layers plus terminals: clusters of step 1, F1, F2, clusters of step 2.
// Unit arcs cluster->facility within R (dummy clusters connect everywhere),
// cross arcs F1->F2 within B with capacity k standing in for "unbounded".
inline DksNetwork buildDksNetwork(const MetricInstance& inst, double R) {
  if (inst.T() != 2) throw std::invalid_argument("buildDksNetwork: T must be 2");
  const TimeStep& s1 = inst.steps[0];
  const TimeStep& s2 = inst.steps[1];
  const double B = inst.B.value();
  DksNetwork D;
  D.clusters1 = buildClusters(inst, s1.clients, R, inst.k);
  D.clusters2 = buildClusters(inst, s2.clients, R, inst.k);
  D.dummies1 = inst.k - static_cast<int>(D.clusters1.representatives.size());
  D.dummies2 = inst.k - static_cast<int>(D.clusters2.representatives.size());

  LayeredFlowNetwork& net = D.net;
  net.source = net.addNode(0, NodeTag::Source);
  net.sink = net.addNode(5, NodeTag::Sink);
  std::vector<int> c1Nodes, c2Nodes;
  for (std::size_t q = 0; q < D.clusters1.representatives.size(); ++q)
    c1Nodes.push_back(net.addNode(1, NodeTag::Cluster, static_cast<int>(q)));
  for (int q = 0; q < D.dummies1; ++q) c1Nodes.push_back(net.addNode(1, NodeTag::Dummy, q));
  for (std::size_t i = 0; i < s1.facilities.size(); ++i)
    D.f1Nodes.push_back(net.addNode(2, NodeTag::FacilityL, static_cast<int>(i)));
  for (std::size_t i = 0; i < s2.facilities.size(); ++i)
    D.f2Nodes.push_back(net.addNode(3, NodeTag::FacilityR, static_cast<int>(i)));
  for (std::size_t q = 0; q < D.clusters2.representatives.size(); ++q)
    c2Nodes.push_back(net.addNode(4, NodeTag::Cluster, static_cast<int>(q)));
  for (int q = 0; q < D.dummies2; ++q) c2Nodes.push_back(net.addNode(4, NodeTag::Dummy, q));

  for (std::size_t q = 0; q < c1Nodes.size(); ++q) net.addArc(net.source, c1Nodes[q], 0, 1, 0.0);
  for (std::size_t q = 0; q < c2Nodes.size(); ++q) net.addArc(c2Nodes[q], net.sink, 0, 1, 0.0);
  for (std::size_t q = 0; q < c1Nodes.size(); ++q) {
    bool dummy = q >= D.clusters1.representatives.size();
    for (std::size_t i = 0; i < s1.facilities.size(); ++i)
      if (dummy || inst.d(D.clusters1.representatives[q], s1.facilities[i]) <= R + 1e-12)
        net.addArc(c1Nodes[q], D.f1Nodes[i], 0, 1, 0.0);
  }
  for (std::size_t q = 0; q < c2Nodes.size(); ++q) {
    bool dummy = q >= D.clusters2.representatives.size();
    for (std::size_t i = 0; i < s2.facilities.size(); ++i)
      if (dummy || inst.d(s2.facilities[i], D.clusters2.representatives[q]) <= R + 1e-12)
        net.addArc(D.f2Nodes[i], c2Nodes[q], 0, 1, 0.0);
  }
  D.crossArc.assign(s1.facilities.size(), std::vector<int>(s2.facilities.size(), -1));
  for (std::size_t i = 0; i < s1.facilities.size(); ++i)
    for (std::size_t i2 = 0; i2 < s2.facilities.size(); ++i2)
      if (inst.d(s1.facilities[i], s2.facilities[i2]) <= B + 1e-12)
        D.crossArc[i][i2] = net.addArc(D.f1Nodes[i], D.f2Nodes[i2], 0, inst.k, 0.0);
  return D;
}

struct DksResult {
  Schedule schedule;
  double radius_guess = 0.0; // smallest feasible R; realized radius <= 3 * this
};

class DksInfeasible : public std::runtime_error {
 public:
  DksInfeasible() : std::runtime_error("no schedule satisfies the movement bound") {}
};

// Flow-based 3-approximation for T = 2: search the sorted client-facility
// distances for the smallest R whose network admits a value-k flow, then read
// facility multiplicities and transitions off that flow.
inline DksResult solveDks(const MetricInstance& inst) {
  if (inst.kind != ProblemKind::dks) throw std::invalid_argument("solveDks: wrong problem kind");
  if (inst.T() != 2) throw std::invalid_argument("solveDks: T must be 2");
  std::vector<double> cands{0.0};
  for (int t = 0; t < 2; ++t)
    for (int j : inst.steps[static_cast<std::size_t>(t)].clients)
      for (int i : inst.steps[static_cast<std::size_t>(t)].facilities) cands.push_back(inst.d(j, i));
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  auto tryRadius = [&](double R, DksNetwork* netOut, IntegralFlow* flowOut) {
    try {
      DksNetwork D = buildDksNetwork(inst, R);
      IntegralFlow f = maxFlowIntegral(D.net, inst.k);
      if (netOut) *netOut = std::move(D);
      if (flowOut) *flowOut = std::move(f);
      return true;
    } catch (const TooManyClusters&) {
      return false;
    } catch (const NoFeasibleFlow&) {
      return false;
    }
  };

  int lo = 0, hi = static_cast<int>(cands.size()) - 1;
  if (!tryRadius(cands[static_cast<std::size_t>(hi)], nullptr, nullptr)) throw DksInfeasible();
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (tryRadius(cands[static_cast<std::size_t>(mid)], nullptr, nullptr))
      hi = mid;
    else
      lo = mid + 1;
  }
  const double R = cands[static_cast<std::size_t>(lo)];
  DksNetwork D;
  IntegralFlow f;
  tryRadius(R, &D, &f);

  const TimeStep& s1 = inst.steps[0];
  const TimeStep& s2 = inst.steps[1];
  Schedule sched;
  sched.open_sets.resize(2);
  std::vector<std::pair<int, int>> moves;
  for (std::size_t i = 0; i < s1.facilities.size(); ++i)
    for (std::size_t i2 = 0; i2 < s2.facilities.size(); ++i2) {
      int a = D.crossArc[i][i2];
      if (a < 0) continue;
      for (int rep = 0; rep < f.values[static_cast<std::size_t>(a)]; ++rep) {
        sched.open_sets[0].push_back(s1.facilities[i]);
        sched.open_sets[1].push_back(s2.facilities[i2]);
        moves.emplace_back(s1.facilities[i], s2.facilities[i2]);
      }
    }
  sched.transitions.push_back(std::move(moves));
  DksResult out;
  out.schedule = evaluateSchedule(inst, std::move(sched));
  out.radius_guess = R;
  return out;
}

// ---------------------------------------------------------------------------
// Hardness-reduction generator: perfect 3D matching -> T = 3 instance whose
// optimal radius is 1 exactly when a perfect matching exists and at least
// 2*alpha + 1 otherwise.
// ---------------------------------------------------------------------------

struct ThreeDMInput {
  int n = 0;                                  // |A| = |B| = |C|
  std::vector<std::array<int, 3>> triplets;   // element indices into A, B, C
};

inline MetricInstance reduce3dm(const ThreeDMInput& in, double alpha) {
  const int m = static_cast<int>(in.triplets.size());
  if (in.n <= 0) throw std::invalid_argument("reduce3dm: n must be positive");
  std::vector<char> seenA(static_cast<std::size_t>(in.n), false), seenB(seenA), seenC(seenA);
  for (const auto& t : in.triplets) {
    for (int q = 0; q < 3; ++q)
      if (t[static_cast<std::size_t>(q)] < 0 || t[static_cast<std::size_t>(q)] >= in.n)
        throw std::invalid_argument("reduce3dm: element index out of range");
    seenA[static_cast<std::size_t>(t[0])] = true;
    seenB[static_cast<std::size_t>(t[1])] = true;
    seenC[static_cast<std::size_t>(t[2])] = true;
  }
  for (int e = 0; e < in.n; ++e)
    if (!seenA[static_cast<std::size_t>(e)] || !seenB[static_cast<std::size_t>(e)] ||
        !seenC[static_cast<std::size_t>(e)])
      throw std::invalid_argument("reduce3dm: some element appears in no triplet");

  // Vertices: a_g, b_g, c_g for each triplet g.
  const int nV = 3 * m;
  auto aId = [&](int g) { return 3 * g; };
  auto bId = [&](int g) { return 3 * g + 1; };
  auto cId = [&](int g) { return 3 * g + 2; };
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(static_cast<std::size_t>(nV),
                                     std::vector<double>(static_cast<std::size_t>(nV), INF));
  for (int v = 0; v < nV; ++v) d[static_cast<std::size_t>(v)][static_cast<std::size_t>(v)] = 0.0;
  auto addEdge = [&](int u, int v, double w) {
    d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] =
        std::min(d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)], w);
    d[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] =
        d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
  };
  for (int g = 0; g < m; ++g) {
    addEdge(aId(g), bId(g), alpha);
    addEdge(bId(g), cId(g), alpha);
  }
  for (int g = 0; g < m; ++g)
    for (int g2 = g + 1; g2 < m; ++g2) {
      if (in.triplets[static_cast<std::size_t>(g)][0] == in.triplets[static_cast<std::size_t>(g2)][0])
        addEdge(aId(g), aId(g2), 1.0);
      if (in.triplets[static_cast<std::size_t>(g)][1] == in.triplets[static_cast<std::size_t>(g2)][1])
        addEdge(bId(g), bId(g2), 1.0);
      if (in.triplets[static_cast<std::size_t>(g)][2] == in.triplets[static_cast<std::size_t>(g2)][2])
        addEdge(cId(g), cId(g2), 1.0);
    }
  for (int mid = 0; mid < nV; ++mid)
    for (int u = 0; u < nV; ++u)
      for (int v = 0; v < nV; ++v)
        if (d[static_cast<std::size_t>(u)][static_cast<std::size_t>(mid)] +
                d[static_cast<std::size_t>(mid)][static_cast<std::size_t>(v)] <
            d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)])
          d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] =
              d[static_cast<std::size_t>(u)][static_cast<std::size_t>(mid)] +
              d[static_cast<std::size_t>(mid)][static_cast<std::size_t>(v)];
  // Disconnected triplet hypergraphs leave infinite entries; cap them at a
  // value beyond every finite path and beyond the 2*alpha+1 dichotomy so the
  // result is still a metric and the radius gap survives.
  double maxFinite = 2.0 * alpha + 1.0;
  for (int u = 0; u < nV; ++u)
    for (int v = 0; v < nV; ++v)
      if (std::isfinite(d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]))
        maxFinite = std::max(maxFinite, d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]);
  for (int u = 0; u < nV; ++u)
    for (int v = 0; v < nV; ++v)
      if (!std::isfinite(d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]))
        d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = maxFinite + 1.0;

  MetricInstance inst;
  inst.dist = std::move(d);
  inst.k = in.n;
  inst.gamma = 1.0;
  inst.B = alpha;
  inst.kind = ProblemKind::dks;
  std::vector<int> VA, VB, VC;
  for (int g = 0; g < m; ++g) {
    VA.push_back(aId(g));
    VB.push_back(bId(g));
    VC.push_back(cId(g));
  }
  for (const auto& pts : {VA, VB, VC}) {
    TimeStep s;
    s.clients = pts;
    s.facilities = pts;
    inst.steps.push_back(std::move(s));
  }
  validateInstance(inst);
  return inst;
}

}  // namespace dynclus
