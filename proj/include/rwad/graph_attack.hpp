#pragma once

// Graph-space poisoning attacks: the relaxed surrogate losses with their
// analytic gradients, the projected-gradient loop, top-K discretization into
// an attacked graph, and the RndAdd / DegAdd baselines.
//
// Gradients through the walk use the adjoint of the row normalization:
// with P = D^{-1} W and G = dL/dP,
//   dL/dw_ij = (G_ij - sum_t G_it p_it) / d_i      (rows with d_i = 0 get G_ij).
// For s = alpha (I - (1-alpha) P^T)^{-1} r and upstream g = dL/ds,
//   dL/dP = (1-alpha) s lambda^T   with lambda = (I - (1-alpha) P^T)^{-T} g,
// and for the one-step refresh s = alpha r + (1-alpha) P^T s_prev,
//   dL/dP = (1-alpha) s_prev g^T.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/graph.hpp"
#include "rwad/models.hpp"
#include "rwad/perturbation.hpp"

namespace rwad {

enum class Variant { alter_i, closed_form };

inline std::string to_string(Variant v) { return v == Variant::alter_i ? "alterI" : "cf"; }

inline Variant parse_variant(const std::string& s) {
  if (s == "alterI" || s == "alteri") return Variant::alter_i;
  if (s == "cf") return Variant::closed_form;
  throw InvalidArgument("unknown attack variant '" + s + "'");
}

struct GraphAttackConfig {
  Index budget = 0;
  int epochs = 60;
  // Normalized steps: the largest entry moves by lr per epoch, so lr * epochs
  // bounds how far any pair travels toward a flip.
  double lr = 0.03;
  double lambda = 3e-5;
  double alpha = kDefaultAlpha;
  Variant variant = Variant::closed_form;
  StepRule step_rule = StepRule::normalized;
  std::uint64_t seed = 0;

  void validate() const {
    if (budget < 0) throw InvalidArgument("budget must be non-negative");
    if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
    require_alpha(alpha);
  }
};

struct SurrogateResult {
  double loss = 0.0;
  Vector grad;   // over the perturbation support
  Matrix state;  // similarity vectors produced this evaluation (one column per source)
};

struct GraphAttackOutcome {
  DenseGraph attacked;
  PerturbationMatrix relaxed;
  PerturbationMatrix discrete;
  std::vector<double> loss_trace;
  std::vector<NodePair> modified_edges;
  std::vector<Index> attack_nodes;
  Index shortfall = 0;
};

namespace detail {

inline std::vector<Index> sorted_unique(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

/// One attack instance: the clean graph, the target set (in full-graph node
/// indices), the model and the optimizable support.
class GraphAttackProblem {
 public:
  static GraphAttackProblem prox(const DenseGraph& g, std::vector<Index> targets, double alpha) {
    if (g.directed()) throw InvalidArgument("ProxGraphRW attacks expect an undirected graph");
    GraphAttackProblem p;
    p.model_ = ModelKind::prox;
    p.w_ = g.weights();
    p.alpha_ = alpha;
    p.targets_ = detail::sorted_unique(std::move(targets));
    p.support_ = PerturbationMatrix::full(g.size());
    p.binary_ = is_binary(p.w_);
    p.check_targets(g.size());
    return p;
  }

  /// `v_targets` index part V; they are shifted past the U block internally.
  static GraphAttackProblem bigraph(const BipartiteGraph& bg, const std::vector<Index>& v_targets, double alpha) {
    GraphAttackProblem p;
    p.model_ = ModelKind::bigraph;
    p.w_ = bipartite_adjacency(bg).weights();
    p.alpha_ = alpha;
    p.k_ = bg.u_size();
    std::vector<Index> t;
    for (Index v : v_targets) {
      if (v < 0 || v >= bg.v_size()) throw InvalidArgument("target outside part V");
      t.push_back(bg.v_node(v));
    }
    p.targets_ = detail::sorted_unique(std::move(t));
    p.support_ = PerturbationMatrix::bipartite(bg.u_size(), bg.v_size());
    p.binary_ = true;
    p.check_targets(bg.node_count());
    return p;
  }

  ModelKind model() const noexcept { return model_; }
  Index node_count() const noexcept { return w_.rows(); }
  Index u_size() const noexcept { return k_; }
  double alpha() const noexcept { return alpha_; }
  bool binary() const noexcept { return binary_; }
  const Matrix& weights() const noexcept { return w_; }
  const std::vector<Index>& targets() const noexcept { return targets_; }
  const PerturbationMatrix& empty_perturbation() const noexcept { return support_; }
  DenseGraph graph() const { return DenseGraph::undirected(w_); }

  /// Targets in model-local indices (part V for bigraph).
  std::vector<Index> local_targets() const {
    std::vector<Index> out;
    for (Index t : targets_) out.push_back(t - k_);
    return out;
  }

  /// Similarity vectors of the clean graph, used to seed the one-step refresh.
  Matrix initial_state() const {
    const TransitionMatrix p = normalize_weights(w_);
    ClosedFormSolver solver(p, alpha_);
    return solver.solve(restart_matrix());
  }

  /// Detector scores over the model's scored nodes (all nodes for prox, part V
  /// for bigraph) on a full weight matrix.
  AnomalyScores scores(const Matrix& w) const {
    if (model_ == ModelKind::prox) return prox_anomaly_scores(DenseGraph::undirected(w), alpha_);
    const Matrix s = ClosedFormSolver(normalize_weights(w), alpha_).solve(restart_matrix());
    const Index m = node_count() - k_;
    AnomalyScores out{Vector(m), ModelKind::bigraph};
    const Matrix mt = w.topRightCorner(k_, m);
    for (Index v = 0; v < m; ++v)
      out.values(v) = 1.0 - neighbor_mean_similarity(mt.col(v), [&](Index j, Index i) { return s(j, i); });
    return out;
  }

  double target_score_sum(const Matrix& w) const {
    const AnomalyScores s = scores(w);
    double sum = 0.0;
    for (Index t : local_targets()) sum += s.values(t);
    return sum;
  }

  /// Surrogate loss sum_T A(v) + lambda * sum b and its gradient over the
  /// support. `carried` is the previous similarity state (alterI only).
  SurrogateResult evaluate(const PerturbationMatrix& b, Variant variant, const Matrix& carried, double lambda) const {
    return model_ == ModelKind::prox ? evaluate_prox(b, variant, carried, lambda)
                                     : evaluate_bigraph(b, variant, carried, lambda);
  }

 private:
  GraphAttackProblem() = default;

  static bool is_binary(const Matrix& w) {
    return ((w.array() == 0.0) || (w.array() == 1.0)).all();
  }

  void check_targets(Index n) const {
    if (targets_.empty()) throw InvalidArgument("target set is empty");
    for (Index t : targets_)
      if (t < 0 || t >= n) throw InvalidArgument("target outside graph");
  }

  Matrix restart_matrix() const {
    const Index n = node_count();
    if (model_ == ModelKind::prox) return Matrix::Constant(n, 1, 1.0 / static_cast<double>(n));
    return Matrix::Identity(n, k_);
  }

  SurrogateResult evaluate_prox(const PerturbationMatrix& b, Variant variant, const Matrix& carried,
                                double lambda) const {
    const Index n = node_count();
    const Matrix wt = perturbed_weights(w_, b);
    const TransitionMatrix p = normalize_weights(wt);
    const Vector strength = wt.rowwise().sum();
    Vector g = Vector::Zero(n);
    for (Index t : targets_) g(t) = -1.0;

    SurrogateResult out;
    Vector s, a, c;
    if (variant == Variant::alter_i) {
      if (carried.rows() != n || carried.cols() != 1) throw DimensionMismatch("carried state has wrong shape");
      a = carried.col(0);
      s = Vector::Constant(n, alpha_ / static_cast<double>(n)) + (1.0 - alpha_) * (p.values().transpose() * a);
      c = g;
    } else {
      ClosedFormSolver solver(p, alpha_);
      s = solver.solve(Vector(Vector::Constant(n, 1.0 / static_cast<double>(n))));
      c = solver.solve_adjoint(g);
      a = s;
    }
    out.loss = lambda * b.mass();
    for (Index t : targets_) out.loss += 1.0 - s(t);

    // dL/dP_ij = (1-alpha) a_i c_j, so sum_t dL/dP_it p_it = (1-alpha) a_i (P c)_i.
    const Vector pc = p.values() * c;
    const double f = 1.0 - alpha_;
    // A dangling row jumps from 0 to e_j once w_ij turns positive, so its
    // derivative is undefined; the secant over a unit weight stands in.
    auto dldw = [&](Index i, Index j) {
      return strength(i) > 0.0 ? f * a(i) * (c(j) - pc(i)) / strength(i) : f * a(i) * c(j);
    };
    out.grad.resize(b.support_size());
    for (Index e = 0; e < b.support_size(); ++e) {
      const auto& [u, v] = b.pair(e);
      out.grad(e) = abs_flip_derivative(w_(u, v), b.value(e)) * (dldw(u, v) + dldw(v, u)) + lambda;
    }
    out.state = s;
    return out;
  }

  SurrogateResult evaluate_bigraph(const PerturbationMatrix& b, Variant variant, const Matrix& carried,
                                   double lambda) const {
    const Index n = node_count();
    const Index k = k_;
    const Index m = n - k;
    const Matrix wt = perturbed_weights(w_, b);
    const TransitionMatrix p = normalize_weights(wt);
    const Vector strength = wt.rowwise().sum();
    const double f = 1.0 - alpha_;

    Matrix s;
    std::optional<ClosedFormSolver> solver;
    if (variant == Variant::alter_i) {
      if (carried.rows() != n || carried.cols() != k) throw DimensionMismatch("carried state has wrong shape");
      s = alpha_ * Matrix::Identity(n, k) + f * (p.values().transpose() * carried);
    } else {
      solver.emplace(p, alpha_);
      s = solver->solve(restart_matrix());
    }

    // Loss over targets and its partials w.r.t. the sources (gamma) and
    // directly w.r.t. the target columns of the relaxed edge matrix.
    const Matrix mt = wt.topRightCorner(k, m);
    Matrix gamma = Matrix::Zero(n, k);
    Matrix direct = Matrix::Zero(k, m);
    SurrogateResult out;
    out.loss = lambda * b.mass();
    for (Index target : targets_) {
      const Index v = target - k;
      const Vector col = mt.col(v);
      const double total = col.sum();
      const double den = total * total - col.squaredNorm();
      double num = 0.0;
      for (Index i = 0; i < k; ++i) {
        if (col(i) == 0.0) continue;
        for (Index j = 0; j < k; ++j)
          if (j != i && col(j) != 0.0) num += col(i) * col(j) * s(j, i);
      }
      const bool has_pairs = den > 0.0 && (col.array() != 0.0).count() >= 2;
      const double mean = has_pairs ? num / den : 0.0;
      out.loss += 1.0 - mean;
      if (!has_pairs) continue;
      for (Index i = 0; i < k; ++i) {
        if (col(i) == 0.0) continue;
        for (Index j = 0; j < k; ++j)
          if (j != i) gamma(j, i) -= col(i) * col(j) / den;
      }
      for (Index i = 0; i < k; ++i) {
        double dnum = 0.0;
        for (Index j = 0; j < k; ++j)
          if (j != i) dnum += col(j) * (s(j, i) + s(i, j));
        const double dden = 2.0 * (total - col(i));
        direct(i, v) = -(dnum * den - num * dden) / (den * den);
      }
    }

    // dL/dP = (1-alpha) A C^T with A the sources used and C the adjoint.
    const Matrix& a_mat = variant == Variant::alter_i ? carried : s;
    const Matrix c_mat = variant == Variant::alter_i ? gamma : solver->solve_adjoint(gamma);
    const Matrix dldp = f * a_mat * c_mat.transpose();
    const Vector q = (dldp.array() * p.values().array()).rowwise().sum();
    auto dldw = [&](Index i, Index j) { return strength(i) > 0.0 ? (dldp(i, j) - q(i)) / strength(i) : dldp(i, j); };

    out.grad.resize(b.support_size());
    for (Index e = 0; e < b.support_size(); ++e) {
      const auto& [u, x] = b.pair(e);
      const double dm = dldw(u, x) + dldw(x, u) + direct(u, x - k);
      out.grad(e) = abs_flip_derivative(w_(u, x), b.value(e)) * dm + lambda;
    }
    out.state = std::move(s);
    return out;
  }

  ModelKind model_ = ModelKind::prox;
  Matrix w_;
  Index k_ = 0;
  double alpha_ = kDefaultAlpha;
  std::vector<Index> targets_;
  PerturbationMatrix support_;
  bool binary_ = false;
};

/// Sum of target anomaly scores plus the sparsity term lambda * sum_{u>v} b_uv.
inline double attack_loss(const AnomalyScores& scores, const std::vector<Index>& targets,
                          const PerturbationMatrix* b = nullptr, double lambda = 0.0) {
  if (targets.empty()) throw InvalidArgument("target set is empty");
  double loss = 0.0;
  for (Index t : targets) {
    if (t < 0 || t >= scores.size()) throw InvalidArgument("target outside score range");
    loss += scores.values(t);
  }
  if (b != nullptr && lambda > 0.0) loss += lambda * b->mass();
  return loss;
}

/// Gradient of the surrogate at b. alterI needs the carried similarity state;
/// the clean-graph state is used when none is given.
inline Vector loss_gradient(const GraphAttackProblem& problem, const PerturbationMatrix& b, Variant variant,
                            double lambda = 0.0, const Matrix* carried = nullptr) {
  const Matrix state = carried != nullptr ? *carried : (variant == Variant::alter_i ? problem.initial_state() : Matrix());
  return problem.evaluate(b, variant, state, lambda).grad;
}

struct RelaxedAttack {
  PerturbationMatrix relaxed;
  std::vector<double> loss_trace;
};

/// Called after each projected step with the epoch index and the new iterate.
using StepObserver = std::function<void(int, const PerturbationMatrix&)>;

/// The epoch loop: refresh scores on |W - B~|, evaluate the surrogate, take
/// one projected step. The budget plays no part until discretization, so one
/// relaxed solution serves every budget.
inline RelaxedAttack optimize_perturbation(const GraphAttackProblem& problem, const GraphAttackConfig& cfg,
                                           const StepObserver& observe = {}) {
  cfg.validate();
  RelaxedAttack out{problem.empty_perturbation(), {}};
  Matrix state = problem.initial_state();
  Optimizer opt(cfg.step_rule, cfg.lr, out.relaxed.support_size());
  out.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SurrogateResult r = problem.evaluate(out.relaxed, cfg.variant, state, cfg.lambda);
    out.loss_trace.push_back(r.loss);
    state = std::move(r.state);
    // Entries pinned at a face of the box, with the gradient pushing outward,
    // cannot move; dropping them keeps them out of the step normalization.
    const Vector& b = out.relaxed.values();
    const Vector g = ((b.array() <= 0.0 && r.grad.array() > 0.0) || (b.array() >= 1.0 && r.grad.array() < 0.0))
                         .select(0.0, r.grad);
    out.relaxed.values() = (b - opt.step(g)).cwiseMax(0.0).cwiseMin(1.0);
    if (observe) observe(epoch, out.relaxed);
  }
  return out;
}

namespace detail {

inline void fill_modifications(GraphAttackOutcome& out) {
  std::vector<Index> nodes;
  for (Index e = 0; e < out.discrete.support_size(); ++e) {
    if (out.discrete.value(e) == 0.0) continue;
    const auto& pr = out.discrete.pair(e);
    out.modified_edges.push_back(pr);
    nodes.push_back(pr.first);
    nodes.push_back(pr.second);
  }
  out.attack_nodes = sorted_unique(std::move(nodes));
}

}  // namespace detail

/// Top-K discretization of a relaxed perturbation into the attacked graph.
inline GraphAttackOutcome finalize_attack(const GraphAttackProblem& problem, const RelaxedAttack& relaxed, Index budget) {
  if (budget > relaxed.relaxed.support_size())
    throw BudgetExceedsSupport("budget " + std::to_string(budget) + " exceeds support size " +
                               std::to_string(relaxed.relaxed.support_size()));
  GraphAttackOutcome out;
  out.relaxed = relaxed.relaxed;
  out.loss_trace = relaxed.loss_trace;
  out.discrete = discretize_topk(relaxed.relaxed, budget, problem.binary());
  out.attacked = DenseGraph::undirected(perturbed_weights(problem.weights(), out.discrete));
  detail::fill_modifications(out);
  return out;
}

inline GraphAttackOutcome run_graph_attack(const GraphAttackProblem& problem, const GraphAttackConfig& cfg) {
  cfg.validate();
  if (cfg.budget > problem.empty_perturbation().support_size())
    throw BudgetExceedsSupport("budget exceeds support size");
  return finalize_attack(problem, optimize_perturbation(problem, cfg), cfg.budget);
}

inline GraphAttackOutcome run_graph_attack(const DenseGraph& g, const std::vector<Index>& targets,
                                           const GraphAttackConfig& cfg) {
  return run_graph_attack(GraphAttackProblem::prox(g, targets, cfg.alpha), cfg);
}

inline GraphAttackOutcome run_graph_attack(const BipartiteGraph& bg, const std::vector<Index>& v_targets,
                                           const GraphAttackConfig& cfg) {
  return run_graph_attack(GraphAttackProblem::bigraph(bg, v_targets, cfg.alpha), cfg);
}

/// Attacked bipartite graph from an outcome on its block adjacency.
inline BipartiteGraph attacked_bipartite(const GraphAttackOutcome& out, Index k) {
  const Index m = out.attacked.size() - k;
  return BipartiteGraph(out.attacked.weights().topRightCorner(k, m));
}

namespace detail {

/// Non-edges incident to a target, as (min, max) pairs in lexicographic order.
/// For bigraph problems only U x V pairs qualify.
inline std::vector<NodePair> addition_candidates(const GraphAttackProblem& problem) {
  const Matrix& w = problem.weights();
  const Index n = problem.node_count();
  std::set<NodePair> pairs;
  for (Index t : problem.targets()) {
    const Index hi = problem.model() == ModelKind::bigraph ? problem.u_size() : n;
    for (Index j = 0; j < hi; ++j) {
      if (j == t || w(t, j) != 0.0) continue;
      pairs.emplace(std::min(t, j), std::max(t, j));
    }
  }
  return {pairs.begin(), pairs.end()};
}

inline GraphAttackOutcome additions_outcome(const GraphAttackProblem& problem, std::vector<NodePair> chosen,
                                            Index budget) {
  GraphAttackOutcome out;
  out.shortfall = std::max<Index>(0, budget - static_cast<Index>(chosen.size()));
  out.discrete = PerturbationMatrix(problem.node_count(), std::move(chosen));
  out.discrete.values().setOnes();
  out.relaxed = out.discrete;
  out.attacked = DenseGraph::undirected(perturbed_weights(problem.weights(), out.discrete));
  fill_modifications(out);
  return out;
}

}  // namespace detail

/// Adds K uniformly drawn target-incident non-edges at weight 1.
inline GraphAttackOutcome baseline_rnd_add(const GraphAttackProblem& problem, Index budget, std::uint64_t seed) {
  if (budget < 0) throw InvalidArgument("budget must be non-negative");
  std::vector<NodePair> cands = detail::addition_candidates(problem);
  std::mt19937_64 rng(seed);
  std::shuffle(cands.begin(), cands.end(), rng);
  if (static_cast<Index>(cands.size()) > budget) cands.resize(static_cast<std::size_t>(budget));
  return detail::additions_outcome(problem, std::move(cands), budget);
}

/// Connects targets to the K highest-degree distinct non-target endpoints
/// (ties by index). Each endpoint goes to the next target, in round-robin
/// order, that is not yet adjacent to it.
inline GraphAttackOutcome baseline_deg_add(const GraphAttackProblem& problem, Index budget) {
  if (budget < 0) throw InvalidArgument("budget must be non-negative");
  const Matrix& w = problem.weights();
  const Vector deg = (w.array() > 0.0).cast<double>().rowwise().sum();
  const auto& targets = problem.targets();
  const std::set<Index> target_set(targets.begin(), targets.end());
  const Index hi = problem.model() == ModelKind::bigraph ? problem.u_size() : problem.node_count();

  std::vector<Index> endpoints;
  for (Index j = 0; j < hi; ++j) {
    if (target_set.count(j)) continue;
    const bool open = std::any_of(targets.begin(), targets.end(), [&](Index t) { return w(t, j) == 0.0; });
    if (open) endpoints.push_back(j);
  }
  std::stable_sort(endpoints.begin(), endpoints.end(), [&](Index a, Index b) { return deg(a) > deg(b); });

  std::vector<NodePair> chosen;
  std::size_t next = 0;
  for (Index j : endpoints) {
    if (static_cast<Index>(chosen.size()) >= budget) break;
    for (std::size_t step = 0; step < targets.size(); ++step) {
      const Index t = targets[(next + step) % targets.size()];
      if (w(t, j) != 0.0) continue;
      chosen.emplace_back(std::min(t, j), std::max(t, j));
      next = (next + step + 1) % targets.size();
      break;
    }
  }
  return detail::additions_outcome(problem, std::move(chosen), budget);
}

}  // namespace rwad
