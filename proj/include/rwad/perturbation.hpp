#pragma once

// Relaxed edge-flip variable and the optimizer steps applied to it.
//
// A perturbation is parametrized by its upper-triangle support pairs (u < v,
// sorted lexicographically); the dense form mirrors each value to (v, u).
// The attacked graph is |W - B| entry-wise.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/graph.hpp"

namespace rwad {

class PerturbationMatrix {
 public:
  PerturbationMatrix() = default;

  PerturbationMatrix(Index n, std::vector<NodePair> support) : n_(n), support_(std::move(support)) {
    for (const auto& [u, v] : support_)
      if (!(u >= 0 && u < v && v < n_)) throw InvalidArgument("support pairs must satisfy 0 <= u < v < n");
    std::sort(support_.begin(), support_.end());
    support_.erase(std::unique(support_.begin(), support_.end()), support_.end());
    values_ = Vector::Zero(static_cast<Index>(support_.size()));
  }

  /// Every off-diagonal pair of an n-node graph.
  static PerturbationMatrix full(Index n) {
    std::vector<NodePair> pairs;
    pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index u = 0; u < n; ++u)
      for (Index v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
    return PerturbationMatrix(n, std::move(pairs));
  }

  /// The U x V block of a bipartite graph with k U-nodes and m V-nodes.
  static PerturbationMatrix bipartite(Index k, Index m) {
    std::vector<NodePair> pairs;
    pairs.reserve(static_cast<std::size_t>(k * m));
    for (Index u = 0; u < k; ++u)
      for (Index v = 0; v < m; ++v) pairs.emplace_back(u, k + v);
    return PerturbationMatrix(k + m, std::move(pairs));
  }

  Index node_count() const noexcept { return n_; }
  Index support_size() const noexcept { return values_.size(); }
  const std::vector<NodePair>& support() const noexcept { return support_; }
  const NodePair& pair(Index e) const { return support_[static_cast<std::size_t>(e)]; }
  const Vector& values() const noexcept { return values_; }
  Vector& values() noexcept { return values_; }
  double value(Index e) const { return values_(e); }

  /// Upper-triangle entries that are nonzero.
  Index nonzero_count() const { return (values_.array() != 0.0).count(); }
  double mass() const { return values_.sum(); }

  Matrix dense() const {
    Matrix b = Matrix::Zero(n_, n_);
    for (Index e = 0; e < support_size(); ++e) {
      const auto& [u, v] = pair(e);
      b(u, v) = values_(e);
      b(v, u) = values_(e);
    }
    return b;
  }

  /// Box, support and finiteness invariants. Symmetry and the zero diagonal
  /// hold by construction of the parametrization.
  bool within_box() const {
    return values_.allFinite() && (values_.array() >= 0.0).all() && (values_.array() <= 1.0).all();
  }

 private:
  Index n_ = 0;
  std::vector<NodePair> support_;
  Vector values_;
};

/// Derivative of |w - b| with respect to b. At the kink w == b the direction
/// that stays inside [0,1] is used.
inline double abs_flip_derivative(double w, double b) {
  if (w > b) return -1.0;
  if (w < b) return 1.0;
  return w >= 0.5 ? -1.0 : 1.0;
}

/// |W - B| restricted to the support; other entries keep their weight.
inline Matrix perturbed_weights(const Matrix& w, const PerturbationMatrix& b) {
  if (b.node_count() != w.rows()) throw DimensionMismatch("perturbation size differs from graph");
  Matrix out = w;
  for (Index e = 0; e < b.support_size(); ++e) {
    const auto& [u, v] = b.pair(e);
    out(u, v) = std::abs(w(u, v) - b.value(e));
    out(v, u) = std::abs(w(v, u) - b.value(e));
  }
  return out;
}

inline DenseGraph apply_perturbation(const DenseGraph& w, const PerturbationMatrix& b) {
  return DenseGraph(perturbed_weights(w.weights(), b), w.directed());
}

/// Plain projected step: b <- clip(b - eta * grad, 0, 1).
inline PerturbationMatrix pgd_step(const PerturbationMatrix& b, const Vector& grad, double eta) {
  if (grad.size() != b.support_size()) throw DimensionMismatch("gradient size differs from support");
  PerturbationMatrix out = b;
  out.values() = (b.values() - eta * grad).cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

/// sgd: eta * g. adam: bias-corrected moment ratio. normalized: eta * g /
/// max|g|, which bounds each step by eta while keeping the relative
/// gradient magnitudes that top-K selection relies on.
enum class StepRule { sgd, adam, normalized };

inline std::string to_string(StepRule r) {
  switch (r) {
    case StepRule::sgd: return "sgd";
    case StepRule::adam: return "adam";
    case StepRule::normalized: return "normalized";
  }
  return "sgd";
}

inline StepRule parse_step_rule(const std::string& s) {
  if (s == "sgd") return StepRule::sgd;
  if (s == "adam") return StepRule::adam;
  if (s == "normalized") return StepRule::normalized;
  throw InvalidArgument("unknown step rule '" + s + "'");
}

/// Projected first-order optimizer over a flat parameter vector. The Adam
/// rule follows the usual bias-corrected moments; the projection is applied
/// by the caller.
class Optimizer {
 public:
  Optimizer(StepRule rule, double eta, Index size, double beta1 = 0.9, double beta2 = 0.999,
            double eps = 1e-8)
      : rule_(rule), eta_(eta), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Vector::Zero(size)), v_(Vector::Zero(size)) {
    if (!(eta > 0.0)) throw InvalidArgument("learning rate must be positive");
  }

  /// Update direction scaled by the learning rate, to be subtracted.
  Vector step(const Vector& grad) {
    if (rule_ == StepRule::sgd) return eta_ * grad;
    if (rule_ == StepRule::normalized) {
      const double peak = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
      return peak > 0.0 ? Vector(eta_ / peak * grad) : Vector(Vector::Zero(grad.size()));
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    return eta_ * ((m_ / c1).array() / ((v_ / c2).array().sqrt() + eps_)).matrix();
  }

  StepRule rule() const noexcept { return rule_; }

 private:
  StepRule rule_;
  double eta_, beta1_, beta2_, eps_;
  Vector m_, v_;
  int t_ = 0;
};

/// Keeps the K largest positive entries (ties by lexicographic pair order);
/// `binary` rounds the kept values to 1.
inline PerturbationMatrix discretize_topk(const PerturbationMatrix& b, Index k, bool binary) {
  if (k < 0) throw InvalidArgument("budget must be non-negative");
  std::vector<Index> order(static_cast<std::size_t>(b.support_size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return b.value(x) > b.value(y); });
  PerturbationMatrix out = b;
  out.values().setZero();
  for (Index r = 0; r < std::min<Index>(k, b.support_size()); ++r) {
    const Index e = order[static_cast<std::size_t>(r)];
    if (b.value(e) <= 0.0) break;
    out.values()(e) = binary ? 1.0 : b.value(e);
  }
  return out;
}

}  // namespace rwad
