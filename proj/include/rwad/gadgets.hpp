#pragma once

// Reduction gadgets from the hardness analysis, the closed-form stationary
// values of the set-cover gadget, and an exhaustive attack oracle for tiny
// instances.
//
// Node order of the set-cover gadget (role-major, frozen):
//   u_0..u_{|U|-1}, Q_0.., q_0.., o_0.., h_0 h_1 h_2,
//   then for each u_i and j < |Q| - |Q(u_i)| the triple x_ij, y_ij, z_ij.
// Node order of the clique gadget: v'_0..v'_{n'-1}, hub t, then the leaf
// fan of each v'_i in turn.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/graph.hpp"
#include "rwad/models.hpp"

namespace rwad {

struct SetCoverInstance {
  Index universe = 0;
  std::vector<std::array<Index, 3>> sets;
  Index k = 0;

  Index set_count() const noexcept { return static_cast<Index>(sets.size()); }

  /// Indices of the sets containing element u.
  std::vector<Index> containing(Index u) const {
    std::vector<Index> out;
    for (Index s = 0; s < set_count(); ++s) {
      const auto& q = sets[static_cast<std::size_t>(s)];
      if (std::find(q.begin(), q.end(), u) != q.end()) out.push_back(s);
    }
    return out;
  }

  bool covers(const std::vector<Index>& chosen) const {
    std::vector<bool> hit(static_cast<std::size_t>(universe), false);
    for (Index s : chosen)
      for (Index u : sets[static_cast<std::size_t>(s)]) hit[static_cast<std::size_t>(u)] = true;
    return std::all_of(hit.begin(), hit.end(), [](bool b) { return b; });
  }

  void validate() const {
    if (universe < 1) throw InvalidArgument("set cover universe is empty");
    if (k < 0) throw InvalidArgument("set cover budget must be non-negative");
    std::vector<bool> hit(static_cast<std::size_t>(universe), false);
    for (const auto& q : sets) {
      for (Index u : q) {
        if (u < 0 || u >= universe) throw InvalidArgument("set element outside universe");
        hit[static_cast<std::size_t>(u)] = true;
      }
      if (q[0] == q[1] || q[0] == q[2] || q[1] == q[2]) throw InvalidArgument("sets must have 3 distinct elements");
    }
    if (!std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }))
      throw InvalidArgument("sets do not cover the universe");
  }
};

enum class RoleKind { u, set, q, o, h, x, y, z, v_prime, hub, leaf };

struct NodeRole {
  RoleKind kind;
  Index i = 0;
  Index j = 0;

  std::string label() const {
    switch (kind) {
      case RoleKind::u: return "u" + std::to_string(i);
      case RoleKind::set: return "Q" + std::to_string(i);
      case RoleKind::q: return "q" + std::to_string(i);
      case RoleKind::o: return "o" + std::to_string(i);
      case RoleKind::h: return "h" + std::to_string(i);
      case RoleKind::x: return "x" + std::to_string(i) + "_" + std::to_string(j);
      case RoleKind::y: return "y" + std::to_string(i) + "_" + std::to_string(j);
      case RoleKind::z: return "z" + std::to_string(i) + "_" + std::to_string(j);
      case RoleKind::v_prime: return "v" + std::to_string(i);
      case RoleKind::hub: return "t";
      case RoleKind::leaf: return "x" + std::to_string(i) + "_" + std::to_string(j);
    }
    return "?";
  }
};

/// A constructed PA-RWAD instance: graph, roles, targets, restart rate,
/// safety threshold, budget and the addable / removable pair sets.
struct GadgetGraph {
  DenseGraph graph;
  std::vector<NodeRole> roles;
  std::vector<Index> targets;
  double alpha = 0.0;
  Index theta = 0;
  Index budget = 0;
  std::vector<NodePair> addable;
  std::vector<NodePair> removable;

  Index size() const noexcept { return graph.size(); }

  std::vector<Index> nodes_of(RoleKind kind) const {
    std::vector<Index> out;
    for (Index v = 0; v < static_cast<Index>(roles.size()); ++v)
      if (roles[static_cast<std::size_t>(v)].kind == kind) out.push_back(v);
    return out;
  }
};

/// Set-cover reduction on a directed graph. |Q| < 4 is accepted only with
/// `allow_small`, for shape checks; the stationary guarantees need |Q| >= 4.
inline GadgetGraph build_directed_gadget(const SetCoverInstance& inst, bool allow_small = false) {
  inst.validate();
  const Index nq = inst.set_count();
  if (nq < 4 && !allow_small) throw InstanceTooSmall("set-cover gadget needs at least 4 sets");
  if (nq < 1) throw InstanceTooSmall("set-cover gadget needs at least one set");

  GadgetGraph g;
  for (Index i = 0; i < inst.universe; ++i) g.roles.push_back({RoleKind::u, i, 0});
  for (RoleKind kind : {RoleKind::set, RoleKind::q, RoleKind::o})
    for (Index i = 0; i < nq; ++i) g.roles.push_back({kind, i, 0});
  for (Index i = 0; i < 3; ++i) g.roles.push_back({RoleKind::h, i, 0});
  for (Index i = 0; i < inst.universe; ++i) {
    const Index fan = nq - static_cast<Index>(inst.containing(i).size());
    for (Index j = 0; j < fan; ++j)
      for (RoleKind kind : {RoleKind::x, RoleKind::y, RoleKind::z}) g.roles.push_back({kind, i, j});
  }
  const Index n = static_cast<Index>(g.roles.size());
  const Index set0 = inst.universe, q0 = set0 + nq, o0 = q0 + nq, h0 = o0 + nq;

  Matrix w = Matrix::Zero(n, n);
  for (Index s = 0; s < nq; ++s)
    for (Index u : inst.sets[static_cast<std::size_t>(s)]) w(set0 + s, u) = 1.0;
  for (Index s = 0; s < nq; ++s)
    for (Index h = 0; h < 3; ++h) w(o0 + s, h0 + h) = 1.0;
  for (Index v = h0 + 3; v < n; v += 3) {
    const Index ui = g.roles[static_cast<std::size_t>(v)].i;
    w(v, ui) = 1.0;
    w(v, v + 1) = 1.0;
    w(v, v + 2) = 1.0;
  }
  g.graph = DenseGraph::directed_graph(std::move(w));
  for (Index i = 0; i < inst.universe; ++i) g.targets.push_back(i);
  g.alpha = 1.0 / static_cast<double>(nq);
  g.theta = n - inst.universe;
  g.budget = inst.k;
  for (Index s = 0; s < nq; ++s) g.addable.emplace_back(q0 + s, set0 + s);
  return g;
}

/// Closed-form stationary values on the set-cover gadget after adding the
/// arcs (q_i, Q_i) for the sets in `added`.
inline Vector lemma1_expected_scores(const SetCoverInstance& inst, const std::vector<Index>& added) {
  inst.validate();
  const double nq = static_cast<double>(inst.set_count());
  if (inst.set_count() < 4) throw InstanceTooSmall("closed forms need at least 4 sets");
  const GadgetGraph g = build_directed_gadget(inst);
  const double n = static_cast<double>(g.size());
  const std::set<Index> a(added.begin(), added.end());
  for (Index s : a)
    if (s < 0 || s >= inst.set_count()) throw InvalidArgument("added set outside collection");

  const double base = 1.0 / (nq * n);
  const double yz = (4.0 - 1.0 / nq) / (3.0 * nq * n);
  const double h = (nq + 2.0) / (3.0 * nq * n);
  const double attached = (2.0 * nq - 1.0) / (nq * nq * n);
  const double gain = (1.0 - 1.0 / nq) * (1.0 - 1.0 / nq);

  Vector s(g.size());
  for (Index v = 0; v < g.size(); ++v) {
    const NodeRole& r = g.roles[static_cast<std::size_t>(v)];
    switch (r.kind) {
      case RoleKind::q:
      case RoleKind::x:
      case RoleKind::o: s(v) = base; break;
      case RoleKind::y:
      case RoleKind::z: s(v) = yz; break;
      case RoleKind::h: s(v) = h; break;
      case RoleKind::set: s(v) = a.count(r.i) ? attached : base; break;
      case RoleKind::u: {
        double hits = 0.0;
        for (Index q : inst.containing(r.i)) hits += a.count(q) ? 1.0 : 0.0;
        s(v) = (nq + 2.0 + hits * gain) / (3.0 * nq * n);
        break;
      }
      default: s(v) = 0.0;
    }
  }
  return s;
}

/// Adds the arcs (q_i, Q_i) of the chosen sets to a set-cover gadget.
inline DenseGraph with_added_sets(const GadgetGraph& g, const std::vector<Index>& sets) {
  Matrix w = g.graph.weights();
  for (Index s : sets) {
    const auto& [from, to] = g.addable.at(static_cast<std::size_t>(s));
    w(from, to) = 1.0;
  }
  return DenseGraph(std::move(w), g.graph.directed());
}

/// Clique reduction on an undirected, unweighted graph G'.
inline GadgetGraph build_undirected_gadget(const DenseGraph& gprime, Index k) {
  if (gprime.directed()) throw InvalidArgument("clique gadget expects an undirected graph");
  const Matrix& wp = gprime.weights();
  if (!((wp.array() == 0.0) || (wp.array() == 1.0)).all()) throw InvalidArgument("clique gadget expects an unweighted graph");
  if (k < 1) throw InvalidArgument("clique size must be at least 1");
  const Index np = gprime.size();
  const Vector deg = gprime.degrees();
  std::vector<Index> fan(static_cast<std::size_t>(np));
  for (Index i = 0; i < np; ++i) {
    const Index f = np + k - static_cast<Index>(deg(i)) - 3;
    if (f < 0) throw NegativeFanSize("leaf fan of node " + std::to_string(i) + " would have negative size");
    fan[static_cast<std::size_t>(i)] = f;
  }

  GadgetGraph g;
  for (Index i = 0; i < np; ++i) g.roles.push_back({RoleKind::v_prime, i, 0});
  g.roles.push_back({RoleKind::hub, 0, 0});
  for (Index i = 0; i < np; ++i)
    for (Index j = 0; j < fan[static_cast<std::size_t>(i)]; ++j) g.roles.push_back({RoleKind::leaf, i, j});
  const Index n = static_cast<Index>(g.roles.size());
  const Index hub = np;

  Matrix w = Matrix::Zero(n, n);
  w.topLeftCorner(np, np) = wp;
  for (Index i = 0; i < np; ++i) w(hub, i) = w(i, hub) = 1.0;
  for (Index v = hub + 1; v < n; ++v) {
    const Index owner = g.roles[static_cast<std::size_t>(v)].i;
    w(owner, v) = w(v, owner) = 1.0;
  }
  g.graph = DenseGraph::undirected(std::move(w));
  g.targets = {hub};
  g.alpha = 0.0;
  g.theta = n - (np - k + 1);
  g.budget = k * (k - 1) / 2;
  for (Index i = 0; i < np; ++i)
    for (Index j = i + 1; j < np; ++j)
      if (wp(i, j) != 0.0) g.removable.emplace_back(i, j);
  return g;
}

/// Number of nodes whose anomaly score exceeds every target's score by more
/// than `tol`.
inline Index safety_count(const Vector& scores, const std::vector<Index>& targets, double tol = 1e-12) {
  if (targets.empty()) throw InvalidArgument("target set is empty");
  double worst = -std::numeric_limits<double>::infinity();
  for (Index t : targets) worst = std::max(worst, scores(t));
  return (scores.array() > worst + tol).count();
}

using GraphScorer = std::function<Vector(const DenseGraph&)>;

/// Uniform-restart anomaly scores, valid on directed graphs and at alpha = 0.
inline GraphScorer uniform_restart_scorer(double alpha) {
  return [alpha](const DenseGraph& g) { return uniform_restart_scores(g, alpha).values; };
}

struct BruteForceResult {
  std::vector<NodePair> best;     // minimizer of the target score sum
  double best_objective = 0.0;
  double clean_objective = 0.0;
  bool threshold_achievable = false;
  std::vector<NodePair> witness;  // first set meeting the safety threshold
  std::uint64_t evaluated = 0;
};

inline constexpr std::uint64_t kBruteForceLimit = 2000000;

namespace detail {

inline std::uint64_t combinations_up_to(std::uint64_t m, std::uint64_t k, std::uint64_t cap) {
  std::uint64_t total = 0, term = 1;
  for (std::uint64_t r = 0; r <= k && r <= m; ++r) {
    if (r > 0) {
      // term = C(m, r); exact in floating point long before the cap is hit.
      const long double next = static_cast<long double>(term) * static_cast<long double>(m - r + 1) / r;
      if (next > static_cast<long double>(cap)) return cap + 1;
      term = static_cast<std::uint64_t>(std::llround(next));
    }
    total += term;
    if (total > cap) return cap + 1;
  }
  return total;
}

}  // namespace detail

/// Exhaustive PA-RWAD search. Each candidate pair is flipped to |w - 1|
/// (both orientations on undirected graphs); sets of size 0..K are visited in
/// lexicographic order and the first minimizer is kept. `theta` < 0 skips
/// the threshold check.
inline BruteForceResult brute_force_attack(const DenseGraph& graph, const std::vector<Index>& targets, Index budget,
                                           const std::vector<NodePair>& addable,
                                           const std::vector<NodePair>& removable, const GraphScorer& scorer,
                                           Index theta = -1, std::uint64_t limit = kBruteForceLimit) {
  if (budget < 0) throw InvalidArgument("budget must be non-negative");
  if (targets.empty()) throw InvalidArgument("target set is empty");
  std::vector<NodePair> cands;
  for (const auto& [u, v] : addable) {
    if (graph.weight(u, v) != 0.0) throw InvalidArgument("addable pair is already an edge");
    cands.emplace_back(u, v);
  }
  for (const auto& [u, v] : removable) {
    if (graph.weight(u, v) == 0.0) throw InvalidArgument("removable pair is not an edge");
    cands.emplace_back(u, v);
  }
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  const std::uint64_t m = cands.size();
  const std::uint64_t k = static_cast<std::uint64_t>(std::min<Index>(budget, static_cast<Index>(m)));
  if (detail::combinations_up_to(m, k, limit) > limit)
    throw SearchSpaceTooLarge("brute force would visit more than " + std::to_string(limit) + " sets");

  BruteForceResult out;
  Matrix w = graph.weights();
  auto flip = [&](const NodePair& p) {
    w(p.first, p.second) = std::abs(w(p.first, p.second) - 1.0);
    if (!graph.directed()) w(p.second, p.first) = w(p.first, p.second);
  };
  auto evaluate = [&](const std::vector<std::size_t>& idx) {
    const Vector s = scorer(DenseGraph(w, graph.directed()));
    double obj = 0.0;
    for (Index t : targets) obj += s(t);
    ++out.evaluated;
    if (out.evaluated == 1) {
      out.clean_objective = obj;
      out.best_objective = obj;
    } else if (obj < out.best_objective) {
      out.best_objective = obj;
      out.best.clear();
      for (std::size_t i : idx) out.best.push_back(cands[i]);
    }
    if (theta >= 0 && !out.threshold_achievable && safety_count(s, targets) >= theta) {
      out.threshold_achievable = true;
      for (std::size_t i : idx) out.witness.push_back(cands[i]);
    }
  };

  std::vector<std::size_t> idx;
  evaluate(idx);
  for (std::uint64_t size = 1; size <= k; ++size) {
    idx.resize(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    for (;;) {
      for (std::size_t i : idx) flip(cands[i]);
      evaluate(idx);
      for (std::size_t i : idx) flip(cands[i]);
      // Next combination in lexicographic order.
      std::size_t pos = size;
      while (pos > 0 && idx[pos - 1] == m - size + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < size; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  return out;
}

inline BruteForceResult brute_force_attack(const GadgetGraph& g) {
  return brute_force_attack(g.graph, g.targets, g.budget, g.addable, g.removable, uniform_restart_scorer(g.alpha),
                            g.theta);
}

/// Every pair of an undirected graph as a flip candidate, split into
/// additions and removals.
inline std::pair<std::vector<NodePair>, std::vector<NodePair>> all_pair_flips(const DenseGraph& g) {
  std::vector<NodePair> add, rem;
  for (Index u = 0; u < g.size(); ++u)
    for (Index v = u + 1; v < g.size(); ++v) (g.weight(u, v) == 0.0 ? add : rem).emplace_back(u, v);
  return {add, rem};
}

/// Random valid set-cover instance: every set has three distinct elements
/// and the union covers the universe.
inline SetCoverInstance random_set_cover(std::mt19937_64& rng, Index universe, Index sets, Index k) {
  if (universe < 3) throw InvalidArgument("universe must have at least 3 elements");
  if (3 * sets < universe) throw InvalidArgument("too few sets to cover the universe");
  SetCoverInstance inst{universe, {}, k};
  std::vector<Index> elems(static_cast<std::size_t>(universe));
  for (Index i = 0; i < universe; ++i) elems[static_cast<std::size_t>(i)] = i;
  // Deal a shuffled copy of the universe across the first sets so the
  // union covers it, then fill the remaining slots at random.
  std::vector<Index> deck = elems;
  std::shuffle(deck.begin(), deck.end(), rng);
  std::size_t next = 0;
  for (Index s = 0; s < sets; ++s) {
    std::set<Index> chosen;
    while (chosen.size() < 3 && next < deck.size()) chosen.insert(deck[next++]);
    std::uniform_int_distribution<Index> pick(0, universe - 1);
    while (chosen.size() < 3) chosen.insert(pick(rng));
    std::array<Index, 3> q{};
    std::copy(chosen.begin(), chosen.end(), q.begin());
    inst.sets.push_back(q);
  }
  inst.validate();
  return inst;
}

/// Random simple undirected graph G'(n', p).
inline DenseGraph random_simple_graph(std::mt19937_64& rng, Index n, double p) {
  std::bernoulli_distribution coin(p);
  Matrix w = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (coin(rng)) w(i, j) = w(j, i) = 1.0;
  return DenseGraph::undirected(std::move(w));
}

}  // namespace rwad
