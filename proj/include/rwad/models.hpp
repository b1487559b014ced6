#pragma once

// The two random-walk anomaly detectors: BiGraphRW on bipartite graphs and
// ProxGraphRW on epsilon-proximity graphs built from features.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/features.hpp"
#include "rwad/graph.hpp"

namespace rwad {

inline constexpr double kDefaultAlpha = 0.15;

enum class ModelKind { bigraph, prox };

inline std::string to_string(ModelKind m) { return m == ModelKind::bigraph ? "bigraph" : "prox"; }

inline ModelKind parse_model(const std::string& s) {
  if (s == "bigraph") return ModelKind::bigraph;
  if (s == "prox") return ModelKind::prox;
  throw InvalidArgument("unknown model '" + s + "'");
}

struct AnomalyScores {
  Vector values;
  ModelKind model = ModelKind::prox;

  Index size() const noexcept { return values.size(); }
  double operator[](Index i) const { return values(i); }
};

struct ProximityConfig {
  Metric metric = Metric::cosine;
  double epsilon = 0.8;

  void validate() const {
    if (!(epsilon >= -1.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in [-1, 1]");
  }
};

/// Edge weights from a full similarity matrix: w_ij = max(sim, 0) when
/// sim > epsilon, zero diagonal.
inline Matrix threshold_similarities(const Matrix& sim, double epsilon) {
  const Index n = sim.rows();
  Matrix w = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j && sim(i, j) > epsilon) w(i, j) = std::max(0.0, sim(i, j));
  return w;
}

/// Pairwise similarity matrix from prepared rows, symmetrized and clamped.
inline Matrix similarity_matrix(const PreparedRows& rows) {
  const Matrix s = rows.unit * rows.unit.transpose();
  return (0.5 * (s + s.transpose())).unaryExpr([](double v) { return clamp_similarity(v); });
}

inline DenseGraph build_proximity_graph(const RowMatrix& x, const ProximityConfig& cfg) {
  cfg.validate();
  if (x.rows() < 2) throw InvalidArgument("proximity graph needs at least two entities");
  return DenseGraph::undirected(threshold_similarities(similarity_matrix(prepare_rows(x, cfg.metric)), cfg.epsilon));
}

inline DenseGraph build_proximity_graph(const FeatureMatrix& x, const ProximityConfig& cfg) {
  return build_proximity_graph(x.values(), cfg);
}

/// Personalized walk restarting at U-node u of the block adjacency.
inline SimilarityVector bigraph_source_similarity(const DenseGraph& w, Index u, double alpha) {
  if (u < 0 || u >= w.size()) throw InvalidArgument("source node out of range");
  return stationary_closed_form(normalize(w), RestartVector::single(w.size(), u), alpha);
}

/// Per-source similarity vectors over the block adjacency, solved lazily
/// against one factorization and cached.
class SourceSimilarities {
 public:
  SourceSimilarities(const DenseGraph& w, double alpha)
      : solver_(normalize(w), alpha), cols_(static_cast<std::size_t>(w.size())) {}

  const SimilarityVector& operator()(Index u) {
    auto& slot = cols_[static_cast<std::size_t>(u)];
    if (!slot) slot = solver_.solve(Vector(Vector::Unit(solver_.size(), u)));
    return *slot;
  }

  std::size_t computed() const {
    return static_cast<std::size_t>(std::count_if(cols_.begin(), cols_.end(), [](const auto& c) { return c.has_value(); }));
  }

 private:
  ClosedFormSolver solver_;
  std::vector<std::optional<SimilarityVector>> cols_;
};

/// Average similarity between ordered pairs of distinct neighbors of V-node v,
/// where `column` holds the (possibly relaxed) edge weights of v to each U
/// node and `sim(j, i)` is s_{u_i}(u_j). Zero when the pair weight vanishes.
template <class Sim>
double neighbor_mean_similarity(const Eigen::Ref<const Vector>& column, Sim&& sim) {
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < column.size(); ++i) {
    if (column(i) == 0.0) continue;
    for (Index j = 0; j < column.size(); ++j) {
      if (j == i || column(j) == 0.0) continue;
      const double pair = column(i) * column(j);
      num += pair * sim(j, i);
      den += pair;
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

inline double neighbor_mean_similarity(const BipartiteGraph& bg, SourceSimilarities& sources, Index v) {
  const Vector column = bg.edges().col(v);
  return neighbor_mean_similarity(column, [&](Index j, Index i) { return sources(i)(j); });
}

inline AnomalyScores bigraph_anomaly_scores(const BipartiteGraph& bg, double alpha) {
  SourceSimilarities sources(bipartite_adjacency(bg), alpha);
  AnomalyScores out{Vector(bg.v_size()), ModelKind::bigraph};
  for (Index v = 0; v < bg.v_size(); ++v) out.values(v) = 1.0 - neighbor_mean_similarity(bg, sources, v);
  return out;
}

inline AnomalyScores prox_anomaly_scores(const DenseGraph& g, double alpha) {
  if (g.directed()) throw InvalidArgument("ProxGraphRW expects an undirected graph");
  const Vector s = stationary_closed_form(normalize(g), RestartVector::uniform(g.size()), alpha);
  return {Vector(1.0 - s.array()), ModelKind::prox};
}

/// Uniform-restart scores 1 - s(v) on any graph, directed or not. alpha = 0
/// falls back to power iteration since the closed form is singular there.
inline AnomalyScores uniform_restart_scores(const DenseGraph& g, double alpha, double tol = 1e-14,
                                            int max_iter = 200000) {
  const TransitionMatrix p = normalize(g);
  const RestartVector r = RestartVector::uniform(g.size());
  Vector s = alpha > 0.0 ? stationary_closed_form(p, r, alpha) : stationary_iterative(p, r, alpha, tol, max_iter).scores;
  return {Vector(1.0 - s.array()), ModelKind::prox};
}

/// Number of flagged nodes for a top fraction, guarding against products
/// such as 0.07 * 100 landing just above an integer.
inline Index flag_count(Index n, double top_q) {
  if (!(top_q > 0.0 && top_q <= 1.0)) throw InvalidArgument("top_q must lie in (0, 1]");
  const double raw = top_q * static_cast<double>(n);
  return std::min<Index>(n, static_cast<Index>(std::ceil(raw - 1e-9)));
}

/// Node order by descending score, ties by ascending index.
inline std::vector<Index> rank_by_score(const Vector& scores) {
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  return order;
}

/// Flags the ceil(top_q * n) highest-scoring nodes.
inline std::vector<bool> classify(const AnomalyScores& scores, double top_q) {
  const Index n = scores.size();
  const Index count = flag_count(n, top_q);
  const auto order = rank_by_score(scores.values);
  std::vector<bool> flags(static_cast<std::size_t>(n), false);
  for (Index r = 0; r < count; ++r) flags[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = true;
  return flags;
}

}  // namespace rwad
