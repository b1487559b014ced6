#pragma once

// Dense graph representations and the random-walk-with-restart solvers.
//
// Orientation: transition matrices are row-normalized (p_ij = w_ij / sum_t w_it)
// and the walk propagates through the transpose, s' = alpha*r + (1-alpha)*P^T s,
// so that s(i) collects mass from the predecessors of i.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rwad/errors.hpp"

namespace rwad {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SimilarityVector = Vector;
using NodePair = std::pair<Index, Index>;

/// Weighted adjacency on n nodes. Weights lie in [0,1], the diagonal is zero
/// and undirected graphs are exactly symmetric.
class DenseGraph {
 public:
  DenseGraph() = default;

  DenseGraph(Matrix weights, bool directed) : w_(std::move(weights)), directed_(directed) {
    validate();
  }

  static DenseGraph undirected(Matrix weights) { return DenseGraph(std::move(weights), false); }
  static DenseGraph directed_graph(Matrix weights) { return DenseGraph(std::move(weights), true); }
  static DenseGraph empty(Index n, bool directed = false) {
    return DenseGraph(Matrix::Zero(n, n), directed);
  }

  Index size() const noexcept { return w_.rows(); }
  bool directed() const noexcept { return directed_; }
  const Matrix& weights() const noexcept { return w_; }
  double weight(Index i, Index j) const { return w_(i, j); }

  /// Number of incident edges with positive weight (out-edges when directed).
  Vector degrees() const { return (w_.array() > 0.0).cast<double>().rowwise().sum(); }
  Vector strengths() const { return w_.rowwise().sum(); }

  /// Upper-triangle edge count for undirected graphs, arc count for directed.
  Index edge_count() const {
    Index c = 0;
    for (Index i = 0; i < size(); ++i)
      for (Index j = directed_ ? 0 : i + 1; j < size(); ++j)
        if (w_(i, j) > 0.0) ++c;
    return c;
  }

 private:
  void validate() const {
    if (w_.rows() != w_.cols()) throw InvalidGraph("adjacency must be square");
    const Index n = w_.rows();
    for (Index i = 0; i < n; ++i) {
      if (w_(i, i) != 0.0) throw InvalidGraph("diagonal must be zero at node " + std::to_string(i));
      for (Index j = 0; j < n; ++j) {
        const double v = w_(i, j);
        if (!(v >= 0.0 && v <= 1.0))
          throw InvalidGraph("weight (" + std::to_string(i) + "," + std::to_string(j) +
                             ") outside [0,1]");
        if (!directed_ && v != w_(j, i))
          throw InvalidGraph("undirected graph is not symmetric at (" + std::to_string(i) + "," +
                             std::to_string(j) + ")");
      }
    }
  }

  Matrix w_;
  bool directed_ = false;
};

/// Binary k x n edge matrix between part U (rows) and part V (columns).
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  explicit BipartiteGraph(Matrix edges) : m_(std::move(edges)) {
    for (Index i = 0; i < m_.rows(); ++i)
      for (Index j = 0; j < m_.cols(); ++j)
        if (m_(i, j) != 0.0 && m_(i, j) != 1.0)
          throw InvalidGraph("bipartite edge matrix must be binary");
  }

  Index u_size() const noexcept { return m_.rows(); }
  Index v_size() const noexcept { return m_.cols(); }
  Index node_count() const noexcept { return m_.rows() + m_.cols(); }
  const Matrix& edges() const noexcept { return m_; }
  bool has_edge(Index u, Index v) const { return m_(u, v) != 0.0; }

  /// Position of V-node v in the combined U-then-V ordering.
  Index v_node(Index v) const noexcept { return m_.rows() + v; }

  Vector v_degrees() const { return m_.colwise().sum().transpose(); }
  Vector u_degrees() const { return m_.rowwise().sum(); }

 private:
  Matrix m_;
};

/// Row-normalized transition matrix. Rows of dangling nodes are zero.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;

  Index size() const noexcept { return p_.rows(); }
  const Matrix& values() const noexcept { return p_; }
  double operator()(Index i, Index j) const { return p_(i, j); }
  bool dangling(Index i) const { return p_.row(i).sum() == 0.0; }

  /// Wraps a matrix whose rows already sum to 1 or 0.
  static TransitionMatrix from_rows(Matrix p) {
    TransitionMatrix t;
    t.p_ = std::move(p);
    return t;
  }

 private:
  Matrix p_;
};

/// Restart distribution: non-negative, sums to one.
class RestartVector {
 public:
  explicit RestartVector(Vector r) : r_(std::move(r)) {
    if ((r_.array() < 0.0).any()) throw InvalidArgument("restart vector has negative entries");
    if (std::abs(r_.sum() - 1.0) > 1e-12) throw InvalidArgument("restart vector must sum to 1");
  }

  static RestartVector uniform(Index n) { return RestartVector(Vector::Constant(n, 1.0 / n)); }
  static RestartVector single(Index n, Index source) {
    Vector r = Vector::Zero(n);
    r(source) = 1.0;
    return RestartVector(std::move(r));
  }

  Index size() const noexcept { return r_.size(); }
  const Vector& values() const noexcept { return r_; }

 private:
  Vector r_;
};

inline void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("restart rate must lie in [0,1]");
}

/// p_ij = w_ij / sum_t w_it, zero rows for dangling nodes.
inline TransitionMatrix normalize_weights(const Matrix& w) {
  Matrix p = w;
  for (Index i = 0; i < p.rows(); ++i) {
    const double d = p.row(i).sum();
    if (d > 0.0)
      p.row(i) /= d;
    else
      p.row(i).setZero();
  }
  return TransitionMatrix::from_rows(std::move(p));
}

inline TransitionMatrix normalize(const DenseGraph& graph) { return normalize_weights(graph.weights()); }

inline SimilarityVector propagate_once(const TransitionMatrix& p, const SimilarityVector& s,
                                       const RestartVector& r, double alpha) {
  require_alpha(alpha);
  if (s.size() != p.size() || r.size() != p.size())
    throw DimensionMismatch("propagate_once: dimensions disagree");
  return alpha * r.values() + (1.0 - alpha) * (p.values().transpose() * s);
}

struct StationaryResult {
  SimilarityVector scores;
  int iterations = 0;
  double residual = 0.0;  // L1 norm of the last update
  bool converged = false;
};

inline constexpr double kDefaultTolerance = 1e-8;
inline constexpr int kDefaultMaxIterations = 1000;

/// Power iteration from s0 = r until the L1 change drops below tol.
/// Hitting max_iter is reported through `converged`, never thrown.
inline StationaryResult stationary_iterative(const TransitionMatrix& p, const RestartVector& r,
                                             double alpha, double tol = kDefaultTolerance,
                                             int max_iter = kDefaultMaxIterations) {
  require_alpha(alpha);
  if (r.size() != p.size()) throw DimensionMismatch("stationary_iterative: dimensions disagree");
  const Matrix pt = p.values().transpose();
  const Vector restart = alpha * r.values();
  StationaryResult out;
  Vector s = r.values();
  Vector next(s.size());
  for (int it = 1; it <= max_iter; ++it) {
    next.noalias() = pt * s;
    next = restart + (1.0 - alpha) * next;
    out.residual = (next - s).lpNorm<1>();
    s.swap(next);
    out.iterations = it;
    if (out.residual < tol) {
      out.converged = true;
      break;
    }
  }
  out.scores = std::move(s);
  return out;
}

/// Factorization of (I - (1-alpha) P^T), reusable across restart vectors and
/// for adjoint solves against its transpose.
class ClosedFormSolver {
 public:
  ClosedFormSolver(const TransitionMatrix& p, double alpha) : alpha_(alpha) {
    require_alpha(alpha);
    const Index n = p.size();
    Matrix a = Matrix::Identity(n, n) - (1.0 - alpha) * p.values().transpose();
    lu_.compute(a);
    if (n > 0 && !(lu_.rcond() > 1e-13))
      throw SingularSystem("random-walk system is singular (alpha = " + std::to_string(alpha) + ")");
  }

  double alpha() const noexcept { return alpha_; }
  Index size() const noexcept { return lu_.rows(); }

  /// s = alpha * (I - (1-alpha) P^T)^{-1} r for each column of rhs.
  Matrix solve(const Matrix& rhs) const { return alpha_ * lu_.solve(rhs); }
  Vector solve(const Vector& rhs) const { return alpha_ * lu_.solve(rhs); }

  /// x = (I - (1-alpha) P^T)^{-T} g, without the alpha factor.
  Matrix solve_adjoint(const Matrix& g) const { return lu_.transpose().solve(g); }
  Vector solve_adjoint(const Vector& g) const { return lu_.transpose().solve(g); }

 private:
  double alpha_;
  Eigen::PartialPivLU<Matrix> lu_;
};

inline SimilarityVector stationary_closed_form(const TransitionMatrix& p, const RestartVector& r,
                                               double alpha) {
  if (r.size() != p.size()) throw DimensionMismatch("stationary_closed_form: dimensions disagree");
  ClosedFormSolver solver(p, alpha);
  Vector s = solver.solve(r.values());
  if (!s.allFinite()) throw SingularSystem("closed-form solve produced non-finite scores");
  return s;
}

/// (k+n) x (k+n) block adjacency [[0, M], [M^T, 0]]; nodes ordered U then V.
inline DenseGraph bipartite_adjacency(const BipartiteGraph& bg) {
  const Index k = bg.u_size();
  const Index n = bg.v_size();
  Matrix w = Matrix::Zero(k + n, k + n);
  w.topRightCorner(k, n) = bg.edges();
  w.bottomLeftCorner(n, k) = bg.edges().transpose();
  return DenseGraph::undirected(std::move(w));
}

}  // namespace rwad
