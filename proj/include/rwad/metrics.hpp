#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/graph.hpp"
#include "rwad/models.hpp"

namespace rwad {

/// Fraction of targets outside the flagged top-q set.
inline double evasion_rate(const AnomalyScores& scores, const std::vector<Index>& targets, double top_q) {
  if (targets.empty()) throw InvalidArgument("target set is empty");
  const std::vector<bool> flagged = classify(scores, top_q);
  Index evaded = 0;
  for (Index t : targets) {
    if (t < 0 || t >= scores.size()) throw InvalidArgument("target outside score range");
    if (!flagged[static_cast<std::size_t>(t)]) ++evaded;
  }
  return static_cast<double>(evaded) / static_cast<double>(targets.size());
}

/// Mann-Whitney AUC: probability that a random anomaly outscores a random
/// normal node, ties counted as one half.
inline double auc(const Vector& scores, const std::vector<bool>& labels) {
  if (static_cast<Index>(labels.size()) != scores.size()) throw DimensionMismatch("labels and scores differ in size");
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
  double rank_sum = 0.0;
  Index pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores(order[j]) == scores(order[i])) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of 1-based ranks i+1..j
    for (std::size_t r = i; r < j; ++r)
      if (labels[static_cast<std::size_t>(order[r])]) rank_sum += mid;
    i = j;
  }
  for (bool l : labels) pos += l ? 1 : 0;
  const Index neg = n - pos;
  if (pos == 0 || neg == 0) throw SingleClass("AUC needs both classes");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

/// Round-half-up of x, guarding against representation error just below .5.
inline Index round_half_up(double x) { return static_cast<Index>(std::floor(x + 0.5 + 1e-9)); }

/// K = round(prop * sum of target degrees), degree counting positive weights.
inline Index budget_from_proportion(const DenseGraph& g, const std::vector<Index>& targets, double prop) {
  if (!(prop >= 0.0)) throw InvalidArgument("budget proportion must be non-negative");
  const Vector deg = g.degrees();
  double total = 0.0;
  for (Index t : targets) {
    if (t < 0 || t >= g.size()) throw InvalidArgument("target outside graph");
    total += deg(t);
  }
  return round_half_up(prop * total);
}

/// Same for V-node targets of a bipartite graph.
inline Index budget_from_proportion(const BipartiteGraph& bg, const std::vector<Index>& v_targets, double prop) {
  if (!(prop >= 0.0)) throw InvalidArgument("budget proportion must be non-negative");
  const Vector deg = bg.v_degrees();
  double total = 0.0;
  for (Index t : v_targets) {
    if (t < 0 || t >= bg.v_size()) throw InvalidArgument("target outside part V");
    total += deg(t);
  }
  return round_half_up(prop * total);
}

inline double mean_of(const AnomalyScores& scores, const std::vector<Index>& nodes) {
  if (nodes.empty()) return 0.0;
  double s = 0.0;
  for (Index v : nodes) s += scores.values(v);
  return s / static_cast<double>(nodes.size());
}

}  // namespace rwad
