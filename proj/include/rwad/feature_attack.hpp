#pragma once

// Graph-guided feature-space attacks on ProxGraphRW.
//
// The attacker edits the feature rows of a node set Z. Each epoch rebuilds
// the proximity graph from the relaxed features, scores it and moves the
// rows of Z along the gradient of either
//   L_a = sum_T A(v)                              (anomaly objective), or
//   L_g = sum |sim(x_i, x_j) - w^_ij| over guided pairs touching Z.
// The threshold gate 1(sim > eps) is held fixed within an epoch; gradients
// also pass through pairs whose similarity lies in a band just below eps so
// that the attack can create edges.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/features.hpp"
#include "rwad/graph.hpp"
#include "rwad/graph_attack.hpp"
#include "rwad/models.hpp"
#include "rwad/perturbation.hpp"

namespace rwad {

enum class NodeOrigin { random, graph_guided };

struct AttackNodeSet {
  std::vector<Index> nodes;
  NodeOrigin origin = NodeOrigin::random;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return nodes.size(); }
  bool empty() const noexcept { return nodes.empty(); }
};

enum class FeatureObjective { anomaly, graph };

inline std::string to_string(FeatureObjective o) { return o == FeatureObjective::anomaly ? "L_a" : "L_g"; }

/// The four feature attack methods compared in the evaluation.
enum class FeatureMethod { vanilla, guided_alter_i, guided_cf, guided_plus };

inline std::string to_string(FeatureMethod m) {
  switch (m) {
    case FeatureMethod::vanilla: return "vanilla";
    case FeatureMethod::guided_alter_i: return "g-guided-alterI";
    case FeatureMethod::guided_cf: return "g-guided-cf";
    case FeatureMethod::guided_plus: return "g-guided-plus";
  }
  return "vanilla";
}

inline FeatureMethod parse_feature_method(const std::string& s) {
  if (s == "vanilla") return FeatureMethod::vanilla;
  if (s == "g-guided-alterI" || s == "g-guided-alteri") return FeatureMethod::guided_alter_i;
  if (s == "g-guided-cf") return FeatureMethod::guided_cf;
  if (s == "g-guided-plus") return FeatureMethod::guided_plus;
  throw InvalidArgument("unknown feature attack method '" + s + "'");
}

struct FeatureAttackConfig {
  Index k_prime = 1;
  int epochs = 100;
  // Steps are measured in units of each column's box width.
  double lr = 0.05;
  FeatureObjective objective = FeatureObjective::anomaly;
  Variant variant = Variant::alter_i;
  ProximityConfig proximity;
  double alpha = kDefaultAlpha;
  double band = 0.05;
  // L_g aims each guided pair at a complete flip |w - 1| rather than the
  // retained relaxed weight; an epsilon-graph cannot hold a weight at or
  // below epsilon, so partial additions would be unreachable.
  bool full_flip_guidance = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (k_prime < 1) throw InvalidArgument("k_prime must be at least 1");
    if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
    if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be non-negative");
    if (!(band >= 0.0)) throw InvalidArgument("straight-through band must be non-negative");
    proximity.validate();
    require_alpha(alpha);
  }
};

/// The graph-space result a guided attack approximates: B-bar and W-hat.
struct GraphGuidance {
  PerturbationMatrix discrete;
  Matrix attacked;

  static GraphGuidance from(const GraphAttackOutcome& out) { return {out.discrete, out.attacked.weights()}; }

  /// Same support, with every guided pair set to |w - 1| of the clean graph.
  static GraphGuidance full_flip(const GraphAttackOutcome& out, const Matrix& clean) {
    if (clean.rows() != out.discrete.node_count()) throw DimensionMismatch("clean graph size differs from guidance");
    Matrix w = out.attacked.weights();
    for (Index e = 0; e < out.discrete.support_size(); ++e) {
      if (out.discrete.value(e) == 0.0) continue;
      const auto& [u, v] = out.discrete.pair(e);
      w(u, v) = w(v, u) = std::abs(clean(u, v) - 1.0);
    }
    return {out.discrete, std::move(w)};
  }
};

struct FeatureAttackOutcome {
  FeatureMatrix attacked;
  AttackNodeSet nodes;
  std::vector<double> loss_trace;
  DenseGraph graph;
  Vector scores_before;  // per target, in target order
  Vector scores_after;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_disjoint(const std::vector<Index>& z, const std::vector<Index>& targets, Index n) {
  const std::set<Index> t(targets.begin(), targets.end());
  for (Index i : z) {
    if (i < 0 || i >= n) throw InvalidArgument("attack node outside feature matrix");
    if (t.count(i)) throw InvalidArgument("attack node " + std::to_string(i) + " is a target");
  }
}

inline void check_targets(const std::vector<Index>& targets, Index n) {
  if (targets.empty()) throw InvalidArgument("target set is empty");
  for (Index t : targets)
    if (t < 0 || t >= n) throw InvalidArgument("target outside feature matrix");
}

}  // namespace detail

/// Endpoints of the modified pairs minus the targets, ranked by incident
/// perturbation mass (ties by index) and truncated to K'.
inline AttackNodeSet select_attack_nodes_guided(const GraphAttackOutcome& outcome, const std::vector<Index>& targets,
                                                Index k_prime) {
  if (k_prime < 0) throw InvalidArgument("k_prime must be non-negative");
  const std::set<Index> t(targets.begin(), targets.end());
  std::vector<double> mass(static_cast<std::size_t>(outcome.discrete.node_count()), 0.0);
  for (Index e = 0; e < outcome.discrete.support_size(); ++e) {
    const double b = outcome.discrete.value(e);
    if (b == 0.0) continue;
    const auto& [u, v] = outcome.discrete.pair(e);
    mass[static_cast<std::size_t>(u)] += b;
    mass[static_cast<std::size_t>(v)] += b;
  }
  std::vector<Index> cands;
  for (Index v : outcome.attack_nodes)
    if (!t.count(v)) cands.push_back(v);
  if (cands.empty()) throw EmptyGuidance("modified edges touch only target nodes");
  std::stable_sort(cands.begin(), cands.end(), [&](Index a, Index b) {
    return mass[static_cast<std::size_t>(a)] > mass[static_cast<std::size_t>(b)];
  });
  if (static_cast<Index>(cands.size()) > k_prime) cands.resize(static_cast<std::size_t>(k_prime));
  std::sort(cands.begin(), cands.end());
  return {std::move(cands), NodeOrigin::graph_guided, {}};
}

/// Number of non-target nodes touched by a graph-space attack.
inline Index guided_node_count(const GraphAttackOutcome& outcome, const std::vector<Index>& targets) {
  const std::set<Index> t(targets.begin(), targets.end());
  return static_cast<Index>(std::count_if(outcome.attack_nodes.begin(), outcome.attack_nodes.end(),
                                          [&](Index v) { return !t.count(v); }));
}

inline AttackNodeSet select_attack_nodes_random(const std::vector<Index>& candidates, const std::vector<Index>& targets,
                                                Index k_prime, std::uint64_t seed) {
  if (k_prime < 0) throw InvalidArgument("k_prime must be non-negative");
  const std::set<Index> t(targets.begin(), targets.end());
  std::set<Index> pool_set;
  for (Index c : candidates)
    if (!t.count(c)) pool_set.insert(c);
  std::vector<Index> pool(pool_set.begin(), pool_set.end());
  AttackNodeSet out{{}, NodeOrigin::random, {}};
  if (pool.empty()) {
    out.warnings.push_back("no candidate attack nodes outside the target set");
    return out;
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (static_cast<Index>(pool.size()) > k_prime) pool.resize(static_cast<std::size_t>(k_prime));
  std::sort(pool.begin(), pool.end());
  out.nodes = std::move(pool);
  return out;
}

/// Loss of ProxGraphRW target scores on a weight matrix with its gradient
/// with respect to every weight w_ij (not symmetrized).
struct ProxWeightGradient {
  double loss = 0.0;
  Matrix dw;
  Vector state;
};

inline ProxWeightGradient prox_weight_gradient(const Matrix& w, const std::vector<Index>& targets, double alpha,
                                               Variant variant, const Vector* carried) {
  const Index n = w.rows();
  const TransitionMatrix p = normalize_weights(w);
  const Vector strength = w.rowwise().sum();
  Vector g = Vector::Zero(n);
  for (Index t : targets) g(t) -= 1.0;

  Vector s, a, c;
  if (variant == Variant::alter_i && carried != nullptr) {
    if (carried->size() != n) throw DimensionMismatch("carried state has wrong size");
    a = *carried;
    s = Vector::Constant(n, alpha / static_cast<double>(n)) + (1.0 - alpha) * (p.values().transpose() * a);
    c = g;
  } else {
    // Without a carried state the one-step refresh of the stationary vector
    // is the stationary vector itself, so both variants share this branch.
    ClosedFormSolver solver(p, alpha);
    s = solver.solve(Vector(Vector::Constant(n, 1.0 / static_cast<double>(n))));
    c = solver.solve_adjoint(g);
    a = s;
  }
  ProxWeightGradient out;
  for (Index t : targets) out.loss += 1.0 - s(t);
  const Vector pc = p.values() * c;
  out.dw = Matrix::Zero(n, n);
  const double f = 1.0 - alpha;
  for (Index i = 0; i < n; ++i) {
    if (strength(i) <= 0.0) continue;
    const double scale = f * a(i) / strength(i);
    out.dw.row(i) = scale * (c.array() - pc(i)).matrix().transpose();
  }
  out.state = std::move(s);
  return out;
}

/// Sum of target anomaly scores on the proximity graph rebuilt from x. The
/// alterI variant refreshes `carried` by one propagation step; without it,
/// the stationary solution is used.
inline double feature_loss_anomaly(const RowMatrix& x, const std::vector<Index>& targets, const ProximityConfig& prox,
                                   double alpha, Variant variant, const Vector* carried = nullptr) {
  detail::check_targets(targets, x.rows());
  const DenseGraph g = build_proximity_graph(x, prox);
  return prox_weight_gradient(g.weights(), targets, alpha, variant, carried).loss;
}

/// Guided pairs (u < v) with b-bar > 0 and at least one endpoint in Z.
inline std::vector<std::pair<NodePair, double>> guided_pairs(const GraphGuidance& guide, const std::vector<Index>& z) {
  const std::set<Index> zs(z.begin(), z.end());
  std::vector<std::pair<NodePair, double>> out;
  for (Index e = 0; e < guide.discrete.support_size(); ++e) {
    if (!(guide.discrete.value(e) > 0.0)) continue;
    const auto& pr = guide.discrete.pair(e);
    if (zs.count(pr.first) || zs.count(pr.second)) out.emplace_back(pr, guide.attacked(pr.first, pr.second));
  }
  return out;
}

/// L_g, counting each unordered guided pair once.
inline double feature_loss_graph(const RowMatrix& x, const GraphGuidance& guide, const std::vector<Index>& z,
                                 const ProximityConfig& prox, std::vector<std::string>* warnings = nullptr) {
  const auto pairs = guided_pairs(guide, z);
  if (pairs.empty() && warnings != nullptr) warnings->push_back("no guided pair is incident to the attack nodes");
  const PreparedRows rows = prepare_rows(x, prox.metric);
  double loss = 0.0;
  for (const auto& [pr, target] : pairs)
    loss += std::abs(clamp_similarity(rows.unit.row(pr.first).dot(rows.unit.row(pr.second))) - target);
  return loss;
}

struct FeatureGradient {
  double loss = 0.0;
  RowMatrix grad;  // rows outside Z are zero
  Vector state;    // similarity vector (L_a only)
};

namespace detail {

/// dL/dx_i for i in Z given the symmetric pair sensitivities gs = dL/dsim.
inline RowMatrix rows_gradient(const PreparedRows& rows, const Matrix& sim, const Matrix& gs,
                               const std::vector<Index>& z) {
  RowMatrix grad = RowMatrix::Zero(rows.unit.rows(), rows.unit.cols());
  for (Index i : z) {
    if (rows.norms(i) == 0.0) continue;
    Eigen::RowVectorXd acc = gs.row(i) * rows.unit;
    const double c = gs.row(i).dot(sim.row(i));
    grad.row(i) = (acc - c * rows.unit.row(i)) / rows.norms(i);
  }
  return grad;
}

}  // namespace detail

/// L_a and its gradient with respect to the rows of Z. Edges are gated at
/// their current state; pairs with similarity in (eps - band, eps] pass the
/// gradient as if open.
inline FeatureGradient feature_gradient_anomaly(const RowMatrix& x, const std::vector<Index>& targets,
                                                const std::vector<Index>& z, const ProximityConfig& prox,
                                                double alpha, Variant variant, const Vector* carried,
                                                double band) {
  const PreparedRows rows = prepare_rows(x, prox.metric);
  const Matrix sim = similarity_matrix(rows);
  const Matrix w = threshold_similarities(sim, prox.epsilon);
  ProxWeightGradient pw = prox_weight_gradient(w, targets, alpha, variant, carried);
  const Index n = x.rows();
  Matrix gs = Matrix::Zero(n, n);
  const double open = prox.epsilon - band;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j && sim(i, j) > 0.0 && (sim(i, j) > prox.epsilon || (band > 0.0 && sim(i, j) > open)))
        gs(i, j) = pw.dw(i, j) + pw.dw(j, i);
  return {pw.loss, detail::rows_gradient(rows, sim, gs, z), std::move(pw.state)};
}

inline FeatureGradient feature_gradient_graph(const RowMatrix& x, const GraphGuidance& guide,
                                              const std::vector<Index>& z, const ProximityConfig& prox) {
  const PreparedRows rows = prepare_rows(x, prox.metric);
  const Matrix sim = similarity_matrix(rows);
  const Index n = x.rows();
  Matrix gs = Matrix::Zero(n, n);
  FeatureGradient out;
  for (const auto& [pr, target] : guided_pairs(guide, z)) {
    const double d = sim(pr.first, pr.second) - target;
    out.loss += std::abs(d);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    gs(pr.first, pr.second) += sign;
    gs(pr.second, pr.first) += sign;
  }
  out.grad = detail::rows_gradient(rows, sim, gs, z);
  return out;
}

inline Vector target_scores(const DenseGraph& g, const std::vector<Index>& targets, double alpha) {
  const AnomalyScores s = prox_anomaly_scores(g, alpha);
  Vector out(static_cast<Index>(targets.size()));
  for (std::size_t t = 0; t < targets.size(); ++t) out(static_cast<Index>(t)) = s.values(targets[t]);
  return out;
}

/// Projected Adam over the rows of Z inside the clean column box, followed
/// by rounding of discrete columns. `guide` is required for L_g.
inline FeatureAttackOutcome run_feature_attack(const FeatureMatrix& x, const AttackNodeSet& z,
                                               const std::vector<Index>& targets, const FeatureAttackConfig& cfg,
                                               const GraphGuidance* guide = nullptr) {
  cfg.validate();
  detail::check_targets(targets, x.rows());
  detail::check_disjoint(z.nodes, targets, x.rows());
  if (static_cast<Index>(z.size()) > cfg.k_prime) throw InvalidArgument("attack node set exceeds k_prime");
  if (cfg.objective == FeatureObjective::graph && guide == nullptr)
    throw InvalidArgument("L_g needs graph-space guidance");

  FeatureAttackOutcome out;
  out.nodes = z;
  out.warnings = z.warnings;
  const DenseGraph clean = build_proximity_graph(x, cfg.proximity);
  out.scores_before = target_scores(clean, targets, cfg.alpha);

  RowMatrix cur = x.values();
  if (!z.empty() && cfg.lr > 0.0) {
    const Index d = x.cols();
    const Index zn = static_cast<Index>(z.size());
    const Vector width = x.upper() - x.lower();
    Optimizer opt(StepRule::adam, 1.0, zn * d);
    std::optional<Vector> state;
    if (cfg.objective == FeatureObjective::anomaly && cfg.variant == Variant::alter_i)
      state = stationary_closed_form(normalize(clean), RestartVector::uniform(x.rows()), cfg.alpha);
    if (cfg.objective == FeatureObjective::graph) {
      std::vector<std::string> w;
      feature_loss_graph(cur, *guide, z.nodes, cfg.proximity, &w);
      out.warnings.insert(out.warnings.end(), w.begin(), w.end());
    }
    out.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));
    Vector flat(zn * d);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      FeatureGradient fg = cfg.objective == FeatureObjective::anomaly
                               ? feature_gradient_anomaly(cur, targets, z.nodes, cfg.proximity, cfg.alpha, cfg.variant,
                                                          state ? &*state : nullptr, cfg.band)
                               : feature_gradient_graph(cur, *guide, z.nodes, cfg.proximity);
      out.loss_trace.push_back(fg.loss);
      if (state) state = std::move(fg.state);
      for (Index r = 0; r < zn; ++r) flat.segment(r * d, d) = fg.grad.row(z.nodes[static_cast<std::size_t>(r)]).transpose();
      const Vector step = opt.step(flat);
      for (Index r = 0; r < zn; ++r) {
        const Index i = z.nodes[static_cast<std::size_t>(r)];
        for (Index j = 0; j < d; ++j)
          cur(i, j) = std::clamp(cur(i, j) - cfg.lr * width(j) * step(r * d + j), x.lower()(j), x.upper()(j));
      }
    }
    const std::size_t tail = std::max<std::size_t>(1, out.loss_trace.size() / 10);
    if (out.loss_trace.size() > tail && !(out.loss_trace.back() < out.loss_trace[out.loss_trace.size() - 1 - tail]))
      out.warnings.push_back("NoProgress: loss did not decrease over the final epochs");
  }
  out.attacked = round_features(cur, x);
  out.graph = build_proximity_graph(out.attacked, cfg.proximity);
  out.scores_after = target_scores(out.graph, targets, cfg.alpha);
  return out;
}

/// End-to-end feature attack by method name. Guided methods need the
/// graph-space outcome of an attack on the clean proximity graph.
inline FeatureAttackOutcome run_feature_method(FeatureMethod method, const FeatureMatrix& x,
                                               const std::vector<Index>& targets, const GraphAttackOutcome* guidance,
                                               FeatureAttackConfig cfg) {
  AttackNodeSet z;
  std::optional<GraphGuidance> guide;
  if (method == FeatureMethod::vanilla) {
    std::vector<Index> all(static_cast<std::size_t>(x.rows()));
    std::iota(all.begin(), all.end(), Index{0});
    z = select_attack_nodes_random(all, targets, cfg.k_prime, cfg.seed);
    cfg.objective = FeatureObjective::anomaly;
    cfg.variant = Variant::alter_i;
  } else {
    if (guidance == nullptr) throw InvalidArgument("guided feature attacks need a graph-space outcome");
    z = select_attack_nodes_guided(*guidance, targets, cfg.k_prime);
    guide = cfg.full_flip_guidance
                ? GraphGuidance::full_flip(*guidance, build_proximity_graph(x, cfg.proximity).weights())
                : GraphGuidance::from(*guidance);
    cfg.objective = method == FeatureMethod::guided_plus ? FeatureObjective::graph : FeatureObjective::anomaly;
    if (method == FeatureMethod::guided_alter_i) cfg.variant = Variant::alter_i;
    if (method == FeatureMethod::guided_cf) cfg.variant = Variant::closed_form;
  }
  return run_feature_attack(x, z, targets, cfg, guide ? &*guide : nullptr);
}

}  // namespace rwad
