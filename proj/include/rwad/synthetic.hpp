#pragma once

// Seeded synthetic benchmarks: a bipartite block model with injected fake
// reviewers for BiGraphRW, clustered feature vectors with peripheral
// outliers for ProxGraphRW, and target sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/features.hpp"
#include "rwad/graph.hpp"
#include "rwad/metrics.hpp"
#include "rwad/models.hpp"

namespace rwad {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for a (seed, index...) tuple.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

struct BipartiteSpec {
  Index u_nodes = 100;
  Index v_nodes = 180;
  Index communities = 4;
  double p_in = 0.25;
  double p_out = 0.002;
  Index min_degree = 4;
};

/// Block model: U and V nodes are dealt round-robin into communities and
/// each U-V pair links with p_in inside a community, p_out across. V nodes
/// below `min_degree` receive extra in-community edges.
inline BipartiteGraph bipartite_block_model(const BipartiteSpec& spec, std::uint64_t seed) {
  if (spec.u_nodes < 1 || spec.v_nodes < 1 || spec.communities < 1) throw InvalidArgument("empty block model");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix m = Matrix::Zero(spec.u_nodes, spec.v_nodes);
  auto community = [&](Index i) { return i % spec.communities; };
  for (Index u = 0; u < spec.u_nodes; ++u)
    for (Index v = 0; v < spec.v_nodes; ++v)
      if (unit(rng) < (community(u) == community(v) ? spec.p_in : spec.p_out)) m(u, v) = 1.0;
  for (Index v = 0; v < spec.v_nodes; ++v) {
    std::vector<Index> pool;
    for (Index u = 0; u < spec.u_nodes; ++u)
      if (community(u) == community(v) && m(u, v) == 0.0) pool.push_back(u);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (Index u : pool) {
      if (m.col(v).sum() >= static_cast<double>(spec.min_degree)) break;
      m(u, v) = 1.0;
    }
  }
  return BipartiteGraph(std::move(m));
}

struct InjectionSpec {
  double fraction = 0.1;
  Index min_edges = 3;
  Index max_edges = 6;
  double quartile = 0.25;
};

struct InjectedBipartite {
  BipartiteGraph graph;
  std::vector<bool> labels;  // per V-node, true for injected
  std::vector<Index> injected;
};

/// Appends ceil(fraction * |V|) V-nodes, each linked to 3-6 distinct U-nodes
/// drawn from the lowest-degree quartile of U.
inline InjectedBipartite inject_bipartite_anomalies(const BipartiteGraph& bg, const InjectionSpec& spec,
                                                    std::uint64_t seed) {
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) throw InvalidArgument("injection fraction must lie in (0, 1)");
  if (spec.min_edges < 1 || spec.max_edges < spec.min_edges) throw InvalidArgument("invalid injected edge range");
  const Index k = bg.u_size();
  const Index n = bg.v_size();
  const Index count = static_cast<Index>(std::ceil(spec.fraction * static_cast<double>(n) - 1e-9));
  const Vector deg = bg.u_degrees();
  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return deg(a) < deg(b); });
  const Index pool_size =
      std::max<Index>(spec.max_edges, static_cast<Index>(std::ceil(spec.quartile * static_cast<double>(k))));
  if (pool_size > k) throw InvalidArgument("U part too small for injection");
  std::vector<Index> pool(order.begin(), order.begin() + pool_size);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> edges(spec.min_edges, spec.max_edges);
  Matrix m = Matrix::Zero(k, n + count);
  m.leftCols(n) = bg.edges();
  InjectedBipartite out;
  for (Index a = 0; a < count; ++a) {
    std::vector<Index> chosen = pool;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(static_cast<std::size_t>(edges(rng)));
    for (Index u : chosen) m(u, n + a) = 1.0;
    out.injected.push_back(n + a);
  }
  out.graph = BipartiteGraph(std::move(m));
  out.labels.assign(static_cast<std::size_t>(n + count), false);
  for (Index v : out.injected) out.labels[static_cast<std::size_t>(v)] = true;
  return out;
}

inline InjectedBipartite inject_bipartite_anomalies(const BipartiteGraph& bg, double fraction, std::uint64_t seed) {
  InjectionSpec spec;
  spec.fraction = fraction;
  return inject_bipartite_anomalies(bg, spec, seed);
}

struct FeatureSpec {
  Index normal = 490;
  Index outliers = 10;
  Index clusters = 10;
  Index dims = 10;
  // Each normal point draws its own noise level from [cluster_noise,
  // cluster_noise_hi], which gives clusters a sparse periphery.
  double cluster_noise = 0.2;
  double cluster_noise_hi = 0.6;
  // Outliers sit on the segment between two cluster centres at a mixing
  // weight drawn from [mix_lo, mix_hi], plus noise.
  double mix_lo = 0.5;
  double mix_hi = 0.55;
  double outlier_noise = 0.1;
  // Outliers are dealt round-robin over this many distinct centre pairs, so
  // anomalies form small groups; 0 draws a fresh pair per outlier.
  Index outlier_groups = 2;
  Index discrete_columns = 0;
  double discrete_scale = 4.0;
};

struct SyntheticFeatures {
  FeatureMatrix features;
  std::vector<bool> labels;  // true for outliers
};

/// Gaussian clusters around orthonormal random centres plus peripheral
/// outliers, shuffled into a random order. Discrete columns, when requested,
/// are rounded multiples of the last continuous coordinates.
inline SyntheticFeatures clustered_features(const FeatureSpec& spec, std::uint64_t seed) {
  if (spec.clusters < 2 && spec.outliers > 0) throw InvalidArgument("outliers need at least two clusters");
  if (spec.dims < 2 || spec.discrete_columns > spec.dims) throw InvalidArgument("invalid feature dimensions");
  if (spec.outlier_groups < 0) throw InvalidArgument("outlier group count must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index d = spec.dims;
  if (spec.clusters > d) throw InvalidArgument("need at least as many dimensions as clusters");
  // Orthonormal centres keep the clusters equally far apart.
  Matrix raw(d, spec.clusters);
  for (Index c = 0; c < spec.clusters; ++c)
    for (Index j = 0; j < d; ++j) raw(j, c) = gauss(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ() * Matrix::Identity(d, spec.clusters);
  std::vector<Eigen::RowVectorXd> centres;
  for (Index c = 0; c < spec.clusters; ++c) centres.push_back(q.col(c).transpose());
  const Index n = spec.normal + spec.outliers;
  RowMatrix x(n, d);
  std::vector<bool> labels(static_cast<std::size_t>(n), false);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Index i = 0; i < spec.normal; ++i) {
    const auto& c = centres[static_cast<std::size_t>(i % spec.clusters)];
    const double sigma = spec.cluster_noise + (spec.cluster_noise_hi - spec.cluster_noise) * unit(rng);
    for (Index j = 0; j < d; ++j) x(i, j) = c(j) + sigma * scale * gauss(rng);
  }
  std::uniform_int_distribution<Index> pick(0, spec.clusters - 1);
  auto draw_pair = [&] {
    const Index c1 = pick(rng);
    Index c2 = pick(rng);
    while (c2 == c1) c2 = pick(rng);
    return std::pair<Index, Index>{c1, c2};
  };
  std::vector<std::pair<Index, Index>> groups;
  for (Index g = 0; g < spec.outlier_groups; ++g) groups.push_back(draw_pair());
  for (Index a = 0; a < spec.outliers; ++a) {
    const Index i = spec.normal + a;
    const auto [c1, c2] = groups.empty() ? draw_pair() : groups[static_cast<std::size_t>(a) % groups.size()];
    const double lam = spec.mix_lo + (spec.mix_hi - spec.mix_lo) * unit(rng);
    const Eigen::RowVectorXd base =
        (lam * centres[static_cast<std::size_t>(c1)] + (1.0 - lam) * centres[static_cast<std::size_t>(c2)]).normalized();
    for (Index j = 0; j < d; ++j) x(i, j) = base(j) + spec.outlier_noise * scale * gauss(rng);
    labels[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  RowMatrix shuffled(n, d);
  std::vector<bool> shuffled_labels(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    shuffled.row(r) = x.row(perm[static_cast<std::size_t>(r)]);
    shuffled_labels[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
  }
  std::vector<FeatureKind> kinds(static_cast<std::size_t>(d), FeatureKind::continuous);
  for (Index j = d - spec.discrete_columns; j < d; ++j) {
    kinds[static_cast<std::size_t>(j)] = FeatureKind::discrete;
    for (Index r = 0; r < n; ++r) shuffled(r, j) = std::round(spec.discrete_scale * shuffled(r, j));
  }
  return {FeatureMatrix(std::move(shuffled), std::move(kinds)), std::move(shuffled_labels)};
}

/// Uniform sample of `count` nodes from the `pool_size` highest scores
/// (ties by index), returned sorted.
inline std::vector<Index> sample_targets(const AnomalyScores& scores, Index pool_size, Index count,
                                         std::uint64_t seed) {
  if (!(count >= 1 && count <= pool_size && pool_size <= scores.size()))
    throw InvalidArgument("target sampling needs 1 <= count <= pool_size <= n");
  std::vector<Index> pool = rank_by_score(scores.values);
  pool.resize(static_cast<std::size_t>(pool_size));
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace rwad
