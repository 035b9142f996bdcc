#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynclus/rng.hpp"

namespace dynclus {

enum class NodeTag {
  Source,
  Sink,
  FacilityL,
  FacilityR,
  BundleL,
  BundleR,
  PairL,
  PairR,
  Cluster,
  Dummy,
  Origin, // tm-mfl fixed start positions
};

struct FlowNode {
  int layer = 0;   // strictly increasing along every arc
  NodeTag tag = NodeTag::Source;
  int payload = -1; // meaning depends on tag (copy id, bundle id, pair id, ...)
};

struct FlowArc {
  int from = 0;
  int to = 0;
  int lower = 0;
  int upper = 0;
  double flow = 0.0;
};

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NoFeasibleFlow : public FlowError {
 public:
  NoFeasibleFlow() : FlowError("no feasible flow at the requested value") {}
};

// Node-and-arc graph with integer capacity windows and a real flow
// annotation. Arcs may only run forward in layer order; that is checked at
// construction time.
struct LayeredFlowNetwork {
  std::vector<FlowNode> nodes;
  std::vector<FlowArc> arcs;
  int source = -1;
  int sink = -1;

  int addNode(int layer, NodeTag tag, int payload = -1) {
    nodes.push_back(FlowNode{layer, tag, payload});
    return static_cast<int>(nodes.size()) - 1;
  }
  int addArc(int from, int to, int lower, int upper, double flow) {
    if (nodes[static_cast<std::size_t>(from)].layer >= nodes[static_cast<std::size_t>(to)].layer)
      throw FlowError("arc does not run forward in layer order");
    if (lower < 0 || upper < lower) throw FlowError("bad capacity window");
    arcs.push_back(FlowArc{from, to, lower, upper, flow});
    return static_cast<int>(arcs.size()) - 1;
  }

  double flowValue() const {
    double v = 0.0;
    for (const FlowArc& a : arcs)
      if (a.from == source) v += a.flow;
    return v;
  }

  // Conservation at every non-terminal node and capacity windows per arc.
  void validateFlow(double tol = 1e-9) const {
    const double capTol = std::max(tol, 1e-7);
    std::vector<double> bal(nodes.size(), 0.0);
    for (const FlowArc& a : arcs) {
      if (a.flow < a.lower - capTol || a.flow > a.upper + capTol)
        throw FlowError("arc flow outside capacity window");
      bal[static_cast<std::size_t>(a.from)] -= a.flow;
      bal[static_cast<std::size_t>(a.to)] += a.flow;
    }
    for (std::size_t v = 0; v < nodes.size(); ++v) {
      if (static_cast<int>(v) == source || static_cast<int>(v) == sink) continue;
      if (std::abs(bal[v]) > tol * std::max<std::size_t>(1, arcs.size()))
        throw FlowError("flow conservation violated");
    }
  }

  void dump(std::ostream& os) const {
    for (const FlowArc& a : arcs)
      os << a.from << ' ' << a.to << ' ' << a.lower << ' ' << a.upper << ' ' << a.flow << '\n';
  }
};

struct IntegralFlow {
  std::vector<int> values; // aligned with net.arcs
  int value = 0;
};

namespace detail {

// Plain BFS augmenting max-flow on an explicit residual structure.
class MaxFlow {
 public:
  explicit MaxFlow(int n) : head_(static_cast<std::size_t>(n), -1) {}

  int addEdge(int u, int v, int cap) {
    edges_.push_back({v, head_[static_cast<std::size_t>(u)], cap});
    head_[static_cast<std::size_t>(u)] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({u, head_[static_cast<std::size_t>(v)], 0});
    head_[static_cast<std::size_t>(v)] = static_cast<int>(edges_.size()) - 1;
    return static_cast<int>(edges_.size()) - 2;
  }

  int run(int s, int t) {
    int total = 0;
    for (;;) {
      std::vector<int> prevEdge(head_.size(), -1);
      std::deque<int> q{s};
      prevEdge[static_cast<std::size_t>(s)] = -2;
      while (!q.empty() && prevEdge[static_cast<std::size_t>(t)] == -1) {
        int u = q.front();
        q.pop_front();
        for (int e = head_[static_cast<std::size_t>(u)]; e >= 0; e = edges_[static_cast<std::size_t>(e)].next) {
          const Edge& ed = edges_[static_cast<std::size_t>(e)];
          if (ed.cap > 0 && prevEdge[static_cast<std::size_t>(ed.to)] == -1) {
            prevEdge[static_cast<std::size_t>(ed.to)] = e;
            q.push_back(ed.to);
          }
        }
      }
      if (prevEdge[static_cast<std::size_t>(t)] == -1) return total;
      int aug = std::numeric_limits<int>::max();
      for (int v = t; v != s;) {
        int e = prevEdge[static_cast<std::size_t>(v)];
        aug = std::min(aug, edges_[static_cast<std::size_t>(e)].cap);
        v = edges_[static_cast<std::size_t>(e ^ 1)].to;
      }
      for (int v = t; v != s;) {
        int e = prevEdge[static_cast<std::size_t>(v)];
        edges_[static_cast<std::size_t>(e)].cap -= aug;
        edges_[static_cast<std::size_t>(e ^ 1)].cap += aug;
        v = edges_[static_cast<std::size_t>(e ^ 1)].to;
      }
      total += aug;
    }
  }

  int flowOn(int edgeId) const { return edges_[static_cast<std::size_t>(edgeId) + 1].cap; }

 private:
  struct Edge {
    int to;
    int next;
    int cap;
  };
  std::vector<Edge> edges_;
  std::vector<int> head_;
};

}  // namespace detail

// Integral flow of exactly `target` units from source to sink, honoring the
// lower bounds via the standard excess-node reduction (close the circulation
// with a fixed sink->source arc of value `target`, shift each lower bound
// onto node demands, then one max-flow between the super terminals).
inline IntegralFlow maxFlowIntegral(const LayeredFlowNetwork& net, int target) {
  const int n = static_cast<int>(net.nodes.size());
  const int superS = n, superT = n + 1;
  detail::MaxFlow mf(n + 2);
  std::vector<long long> excess(static_cast<std::size_t>(n), 0);
  std::vector<int> arcEdge(net.arcs.size(), -1);
  for (std::size_t a = 0; a < net.arcs.size(); ++a) {
    const FlowArc& arc = net.arcs[a];
    if (arc.upper > arc.lower)
      arcEdge[a] = mf.addEdge(arc.from, arc.to, arc.upper - arc.lower);
    excess[static_cast<std::size_t>(arc.to)] += arc.lower;
    excess[static_cast<std::size_t>(arc.from)] -= arc.lower;
  }
  // Closure arc sink->source with lower = upper = target.
  excess[static_cast<std::size_t>(net.source)] += target;
  excess[static_cast<std::size_t>(net.sink)] -= target;
  long long need = 0;
  for (int v = 0; v < n; ++v) {
    if (excess[static_cast<std::size_t>(v)] > 0) {
      mf.addEdge(superS, v, static_cast<int>(excess[static_cast<std::size_t>(v)]));
      need += excess[static_cast<std::size_t>(v)];
    } else if (excess[static_cast<std::size_t>(v)] < 0) {
      mf.addEdge(v, superT, static_cast<int>(-excess[static_cast<std::size_t>(v)]));
    }
  }
  if (mf.run(superS, superT) != need) throw NoFeasibleFlow();
  IntegralFlow out;
  out.values.assign(net.arcs.size(), 0);
  for (std::size_t a = 0; a < net.arcs.size(); ++a) {
    out.values[a] = net.arcs[a].lower + (arcEdge[a] >= 0 ? mf.flowOn(arcEdge[a]) : 0);
  }
  out.value = target;
  return out;
}

namespace detail {

constexpr double kIntTol = 1e-7;

inline bool isFractional(double x) { return std::abs(x - std::round(x)) > kIntTol; }

}  // namespace detail

// One undirected cycle through the currently fractional arcs of the closed
// circulation, as (arc id, +1 forward / -1 backward) pairs. Deterministic:
// arcs are explored in ascending id order.
struct RotationCycle {
  std::vector<std::pair<int, int>> arcs;
  double eps_plus = 0.0;  // max rotation in the forward direction
  double eps_minus = 0.0; // max rotation in the backward direction
};

namespace detail {

inline RotationCycle findFractionalCycle(const LayeredFlowNetwork& net,
                                         const std::vector<double>& flow) {
  const int n = static_cast<int>(net.nodes.size());
  std::vector<std::vector<int>> inc(static_cast<std::size_t>(n));
  for (std::size_t a = 0; a < net.arcs.size(); ++a) {
    if (!isFractional(flow[a])) continue;
    inc[static_cast<std::size_t>(net.arcs[a].from)].push_back(static_cast<int>(a));
    inc[static_cast<std::size_t>(net.arcs[a].to)].push_back(static_cast<int>(a));
  }
  for (auto& v : inc) std::sort(v.begin(), v.end());
  int start = -1;
  for (int v = 0; v < n && start < 0; ++v)
    if (!inc[static_cast<std::size_t>(v)].empty()) start = v;
  if (start < 0) return {};

  // Every node touching a fractional arc has at least two of them
  // (conservation), so a walk that never reuses an arc must close a cycle.
  std::vector<int> pathArc, pathNode{start};
  std::vector<char> usedArc(net.arcs.size(), false);
  std::vector<int> seenAt(static_cast<std::size_t>(n), -1);
  seenAt[static_cast<std::size_t>(start)] = 0;
  int cur = start;
  for (;;) {
    int next = -1, via = -1;
    for (int a : inc[static_cast<std::size_t>(cur)]) {
      if (usedArc[static_cast<std::size_t>(a)]) continue;
      via = a;
      next = net.arcs[static_cast<std::size_t>(a)].from == cur ? net.arcs[static_cast<std::size_t>(a)].to
                                                               : net.arcs[static_cast<std::size_t>(a)].from;
      break;
    }
    if (via < 0) throw FlowError("fractional subgraph is not a circulation");
    usedArc[static_cast<std::size_t>(via)] = true;
    pathArc.push_back(via);
    pathNode.push_back(next);
    if (seenAt[static_cast<std::size_t>(next)] >= 0) {
      const int at = seenAt[static_cast<std::size_t>(next)];
      RotationCycle cyc;
      cyc.eps_plus = cyc.eps_minus = std::numeric_limits<double>::infinity();
      for (std::size_t q = static_cast<std::size_t>(at); q < pathArc.size(); ++q) {
        int a = pathArc[q];
        int dir = net.arcs[static_cast<std::size_t>(a)].from == pathNode[q] ? +1 : -1;
        cyc.arcs.emplace_back(a, dir);
        double f = flow[static_cast<std::size_t>(a)];
        double up = std::ceil(f) - f;   // to the next integer above (within the window)
        double down = f - std::floor(f);
        if (dir > 0) {
          cyc.eps_plus = std::min(cyc.eps_plus, up);
          cyc.eps_minus = std::min(cyc.eps_minus, down);
        } else {
          cyc.eps_plus = std::min(cyc.eps_plus, down);
          cyc.eps_minus = std::min(cyc.eps_minus, up);
        }
      }
      return cyc;
    }
    seenAt[static_cast<std::size_t>(next)] = static_cast<int>(pathArc.size());
    cur = next;
  }
}

inline void applyRotation(std::vector<double>& flow, const RotationCycle& cyc, double delta) {
  for (auto [a, dir] : cyc.arcs) {
    flow[static_cast<std::size_t>(a)] += dir * delta;
    double r = std::round(flow[static_cast<std::size_t>(a)]);
    if (std::abs(flow[static_cast<std::size_t>(a)] - r) <= kIntTol) flow[static_cast<std::size_t>(a)] = r;
  }
}

}  // namespace detail

// Marginal-preserving dependent rounding of the fractional annotation: closes
// the circulation with a sink->source arc, repeatedly finds a cycle among the
// fractional arcs and rotates it by the slack to the nearest integer bound,
// choosing the direction with probability proportional to the opposite
// slack. Every intermediate flow is feasible and has the original value; each
// rotation makes at least one more arc integral, and E[result] equals the
// input arc-for-arc.
inline IntegralFlow dependentRoundFlow(const LayeredFlowNetwork& net, std::uint64_t seed) {
  net.validateFlow();
  const double value = net.flowValue();
  if (detail::isFractional(value)) throw FlowError("input flow value is not integral");

  // Closed circulation: a virtual arc sink->source carrying the whole value.
  // It is integral already, so rotations never touch it; we only need the
  // conservation bookkeeping, which the cycle search gets for free because
  // the source/sink imbalance is +-value on both sides. To keep the search
  // simple the virtual arc is materialized in a scratch copy.
  LayeredFlowNetwork scratch = net;
  // Give the virtual arc legal layers by re-tagging: cycle search treats arcs
  // as undirected, so direction does not matter; bypass addArc checks.
  scratch.arcs.push_back(FlowArc{scratch.sink, scratch.source, static_cast<int>(std::llround(value)),
                                 static_cast<int>(std::llround(value)), value});
  std::vector<double> flow(scratch.arcs.size());
  for (std::size_t a = 0; a < scratch.arcs.size(); ++a) flow[a] = scratch.arcs[a].flow;

  Rng rng(seed);
  const std::size_t guard = 10 * scratch.arcs.size() + 100;
  for (std::size_t iter = 0;; ++iter) {
    RotationCycle cyc = detail::findFractionalCycle(scratch, flow);
    if (cyc.arcs.empty()) break;
    if (iter > guard) throw FlowError("dependent rounding failed to converge");
    const double ep = cyc.eps_plus, em = cyc.eps_minus;
    if (!(ep > 0) || !(em > 0)) throw FlowError("degenerate rotation slack");
    if (rng.nextDouble() < em / (ep + em))
      detail::applyRotation(flow, cyc, ep);
    else
      detail::applyRotation(flow, cyc, -em);
  }

  IntegralFlow out;
  out.values.assign(net.arcs.size(), 0);
  for (std::size_t a = 0; a < net.arcs.size(); ++a) {
    out.values[a] = static_cast<int>(std::llround(flow[a]));
    if (out.values[a] < net.arcs[a].lower || out.values[a] > net.arcs[a].upper)
      throw FlowError("rounded flow left its capacity window");
  }
  out.value = static_cast<int>(std::llround(value));
  return out;
}

}  // namespace dynclus
