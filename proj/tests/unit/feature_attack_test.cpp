#include <gtest/gtest.h>

#include <random>
#include <set>

#include "rwad/feature_attack.hpp"
#include "support/cases.hpp"

namespace rwad {
namespace {

using testing::central_differences;
using testing::max_relative_error;

using testing::flatten_rows;
using testing::well_separated_features;
using testing::with_rows;

struct GradientCase {
  Metric metric;
  Variant variant;
};

class AnomalyGradient : public ::testing::TestWithParam<GradientCase> {};

TEST_P(AnomalyGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(41);
  const ProximityConfig prox{GetParam().metric, 0.3};
  for (int trial = 0; trial < 5; ++trial) {
    const RowMatrix x = well_separated_features(rng, 10, 4, prox);
    const std::vector<Index> targets{0, 3};
    const std::vector<Index> z{1, 5, 8};
    const DenseGraph g = build_proximity_graph(x, prox);
    // Carried state off the fixed point so the one-step surrogate differs
    // from the stationary one.
    Vector carried = stationary_closed_form(normalize(g), RestartVector::uniform(10), 0.2);
    carried = (carried.array() + 0.01).matrix();
    const Vector* cp = GetParam().variant == Variant::alter_i ? &carried : nullptr;
    const FeatureGradient fg =
        feature_gradient_anomaly(x, targets, z, prox, 0.2, GetParam().variant, cp, /*band=*/0.0);
    auto f = [&](const Vector& flat) {
      return feature_loss_anomaly(with_rows(x, z, flat), targets, prox, 0.2, GetParam().variant, cp);
    };
    const Vector numeric = central_differences(f, flatten_rows(x, z));
    EXPECT_NEAR(fg.loss, f(flatten_rows(x, z)), 1e-12);
    EXPECT_LT(max_relative_error(flatten_rows(fg.grad, z), numeric), 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Cases, AnomalyGradient,
                         ::testing::Values(GradientCase{Metric::cosine, Variant::alter_i},
                                           GradientCase{Metric::cosine, Variant::closed_form},
                                           GradientCase{Metric::correlation, Variant::alter_i},
                                           GradientCase{Metric::correlation, Variant::closed_form}));

class GraphObjectiveGradient : public ::testing::TestWithParam<Metric> {};

TEST_P(GraphObjectiveGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(43);
  const ProximityConfig prox{GetParam(), 0.3};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const RowMatrix x = well_separated_features(rng, 10, 4, prox);
    const std::vector<Index> z{2, 6};
    GraphGuidance guide{PerturbationMatrix::full(10), Matrix::Zero(10, 10)};
    const Matrix sim = similarity_matrix(prepare_rows(x, prox.metric));
    for (Index e = 0; e < guide.discrete.support_size(); ++e) {
      if (unit(rng) > 0.3) continue;
      const auto& [u, v] = guide.discrete.pair(e);
      guide.discrete.values()(e) = 1.0;
      // Keep every prescribed weight away from the current similarity.
      double w = unit(rng);
      if (std::abs(w - sim(u, v)) < 0.05) w = sim(u, v) > 0.5 ? 0.0 : 1.0;
      guide.attacked(u, v) = guide.attacked(v, u) = w;
    }
    const FeatureGradient fg = feature_gradient_graph(x, guide, z, prox);
    auto f = [&](const Vector& flat) { return feature_loss_graph(with_rows(x, z, flat), guide, z, prox); };
    EXPECT_NEAR(fg.loss, f(flatten_rows(x, z)), 1e-12);
    EXPECT_LT(max_relative_error(flatten_rows(fg.grad, z), central_differences(f, flatten_rows(x, z))), 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Metrics, GraphObjectiveGradient, ::testing::Values(Metric::cosine, Metric::correlation));

GraphAttackOutcome outcome_with(Index n, const std::vector<std::pair<NodePair, double>>& edges) {
  GraphAttackOutcome out;
  out.discrete = PerturbationMatrix::full(n);
  for (const auto& [pr, b] : edges) {
    const auto it = std::lower_bound(out.discrete.support().begin(), out.discrete.support().end(), pr);
    out.discrete.values()(it - out.discrete.support().begin()) = b;
    out.modified_edges.push_back(pr);
    out.attack_nodes.push_back(pr.first);
    out.attack_nodes.push_back(pr.second);
  }
  out.attack_nodes = detail::sorted_unique(out.attack_nodes);
  return out;
}

TEST(SelectGuided, IncidentNodesMinusTargets) {
  const auto out = outcome_with(6, {{{0, 2}, 1.0}, {{0, 4}, 1.0}});
  const auto z = select_attack_nodes_guided(out, {0}, 5);
  EXPECT_EQ(z.nodes, (std::vector<Index>{2, 4}));
  EXPECT_EQ(z.origin, NodeOrigin::graph_guided);
}

TEST(SelectGuided, TruncatesByMass) {
  const auto out = outcome_with(6, {{{0, 2}, 0.9}, {{0, 4}, 0.4}});
  EXPECT_EQ(select_attack_nodes_guided(out, {0}, 1).nodes, (std::vector<Index>{2}));
}

TEST(SelectGuided, MassTiesBreakByIndex) {
  const auto out = outcome_with(6, {{{0, 5}, 0.5}, {{0, 3}, 0.5}});
  EXPECT_EQ(select_attack_nodes_guided(out, {0}, 1).nodes, (std::vector<Index>{3}));
}

TEST(SelectGuided, OnlyTargetsThrows) {
  const auto out = outcome_with(6, {{{0, 1}, 1.0}});
  EXPECT_THROW(select_attack_nodes_guided(out, {0, 1}, 3), EmptyGuidance);
}

TEST(SelectRandom, AllCandidatesWhenBudgetLarge) {
  const auto z = select_attack_nodes_random({1, 2, 3, 4}, {2}, 10, 7);
  EXPECT_EQ(z.nodes, (std::vector<Index>{1, 3, 4}));
}

TEST(SelectRandom, SeededDeterminism) {
  std::vector<Index> cands(50);
  std::iota(cands.begin(), cands.end(), Index{0});
  const auto a = select_attack_nodes_random(cands, {0, 1}, 5, 99);
  const auto b = select_attack_nodes_random(cands, {0, 1}, 5, 99);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.size(), 5u);
  for (Index v : a.nodes) EXPECT_GT(v, 1);
}

TEST(SelectRandom, CandidatesAllTargetsWarns) {
  const auto z = select_attack_nodes_random({1, 2}, {1, 2}, 3, 0);
  EXPECT_TRUE(z.empty());
  EXPECT_FALSE(z.warnings.empty());
}

TEST(FeatureLossAnomaly, CleanFeaturesGiveCleanScoreSum) {
  std::mt19937_64 rng(3);
  const ProximityConfig prox{Metric::cosine, 0.3};
  const RowMatrix x = well_separated_features(rng, 12, 3, prox);
  const std::vector<Index> targets{1, 7};
  const AnomalyScores s = prox_anomaly_scores(build_proximity_graph(x, prox), 0.15);
  EXPECT_NEAR(feature_loss_anomaly(x, targets, prox, 0.15, Variant::closed_form), s[1] + s[7], 1e-12);
  EXPECT_NEAR(feature_loss_anomaly(x, targets, prox, 0.15, Variant::alter_i), s[1] + s[7], 1e-12);
}

TEST(FeatureLossAnomaly, IdenticalRowsGiveEqualScores) {
  RowMatrix x(5, 3);
  x.rowwise() = Eigen::RowVectorXd::LinSpaced(3, 1.0, 2.0);
  const ProximityConfig prox{Metric::cosine, 0.8};
  const double loss = feature_loss_anomaly(x, {0, 2}, prox, 0.15, Variant::closed_form);
  EXPECT_NEAR(loss, 2.0 * (1.0 - 1.0 / 5.0), 1e-12);
}

TEST(FeatureLossAnomaly, FarNodeChangeLeavesLossUnchanged) {
  // Two tight clusters along e0 and e1 plus a node along e2, isolated at
  // epsilon 0.8 before and after its own perturbation.
  RowMatrix x(7, 3);
  x << 1, 0.1, 0, 1, 0.12, 0, 0.9, 0.1, 0.01, 0.1, 1, 0, 0.12, 1, 0, 0.1, 0.9, 0.02, 0, 0, 1;
  const ProximityConfig prox{Metric::cosine, 0.8};
  const double before = feature_loss_anomaly(x, {0, 3}, prox, 0.15, Variant::closed_form);
  x(6, 2) = 0.7;
  x(6, 0) = 0.1;
  EXPECT_NEAR(feature_loss_anomaly(x, {0, 3}, prox, 0.15, Variant::closed_form), before, 1e-10);
}

TEST(FeatureLossGraph, RealizedGuidanceIsZero) {
  RowMatrix x(3, 2);
  x << 1, 0, 0.6, 0.8, 0, 1;
  const ProximityConfig prox{Metric::cosine, 0.5};
  const Matrix sim = similarity_matrix(prepare_rows(x, prox.metric));
  GraphGuidance guide{PerturbationMatrix::full(3), sim};
  guide.attacked.diagonal().setZero();
  guide.discrete.values().setOnes();
  EXPECT_NEAR(feature_loss_graph(x, guide, {1}, prox), 0.0, 1e-15);
}

TEST(FeatureLossGraph, SinglePairAbsoluteGap) {
  RowMatrix x(2, 2);
  x << 1, 0, 0.3, std::sqrt(1 - 0.09);
  const ProximityConfig prox{Metric::cosine, 0.5};
  GraphGuidance guide{PerturbationMatrix::full(2), Matrix::Zero(2, 2)};
  guide.discrete.values()(0) = 1.0;
  guide.attacked(0, 1) = guide.attacked(1, 0) = 0.8;
  EXPECT_NEAR(feature_loss_graph(x, guide, {1}, prox), 0.5, 1e-12);
}

TEST(FeatureLossGraph, NoIncidentPairWarns) {
  RowMatrix x = RowMatrix::Random(4, 3);
  const ProximityConfig prox{Metric::cosine, 0.5};
  GraphGuidance guide{PerturbationMatrix::full(4), Matrix::Zero(4, 4)};
  guide.discrete.values()(0) = 1.0;  // pair (0, 1)
  std::vector<std::string> warnings;
  EXPECT_EQ(feature_loss_graph(x, guide, {3}, prox, &warnings), 0.0);
  EXPECT_EQ(warnings.size(), 1u);
}

FeatureMatrix mixed_features(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, 5);
  RowMatrix v(n, 4);
  for (Index i = 0; i < n; ++i) v.row(i) << 1.0 + unit(rng), unit(rng), level(rng), unit(rng) * 2.0;
  return FeatureMatrix(v, {FeatureKind::continuous, FeatureKind::continuous, FeatureKind::discrete,
                           FeatureKind::continuous});
}

TEST(RunFeatureAttack, ZeroLearningRateIsIdentity) {
  std::mt19937_64 rng(5);
  const FeatureMatrix x = mixed_features(rng, 20);
  FeatureAttackConfig cfg;
  cfg.k_prime = 3;
  cfg.lr = 0.0;
  cfg.epochs = 5;
  cfg.proximity = {Metric::cosine, 0.9};
  const auto out = run_feature_attack(x, {{4, 5, 6}, NodeOrigin::random, {}}, {0, 1}, cfg);
  EXPECT_TRUE(out.attacked.values() == x.values());
}

TEST(RunFeatureAttack, EmptyAttackSetIsIdentity) {
  std::mt19937_64 rng(6);
  const FeatureMatrix x = mixed_features(rng, 20);
  FeatureAttackConfig cfg;
  cfg.proximity = {Metric::cosine, 0.9};
  cfg.epochs = 3;
  const auto out = run_feature_attack(x, {}, {0}, cfg);
  EXPECT_TRUE(out.attacked.values() == x.values());
  EXPECT_NEAR((out.scores_after - out.scores_before).cwiseAbs().maxCoeff(), 0.0, 0.0);
}

TEST(RunFeatureAttack, RejectsTargetInAttackSet) {
  std::mt19937_64 rng(7);
  const FeatureMatrix x = mixed_features(rng, 10);
  FeatureAttackConfig cfg;
  cfg.k_prime = 2;
  EXPECT_THROW(run_feature_attack(x, {{0, 4}, NodeOrigin::random, {}}, {0}, cfg), InvalidArgument);
}

TEST(RunFeatureAttack, FrozenRowsBoxAndRecordedScores) {
  std::mt19937_64 rng(8);
  const FeatureMatrix x = mixed_features(rng, 30);
  FeatureAttackConfig cfg;
  cfg.k_prime = 4;
  cfg.epochs = 30;
  cfg.lr = 0.1;
  cfg.proximity = {Metric::cosine, 0.95};
  const std::vector<Index> z{3, 9, 12, 20}, targets{0, 1, 2};
  for (Variant variant : {Variant::alter_i, Variant::closed_form}) {
    cfg.variant = variant;
    const auto out = run_feature_attack(x, {z, NodeOrigin::random, {}}, targets, cfg);
    const std::set<Index> zs(z.begin(), z.end());
    for (Index i = 0; i < x.rows(); ++i) {
      if (!zs.count(i)) {
        EXPECT_TRUE(out.attacked.values().row(i) == x.values().row(i)) << "row " << i;
      }
    }
    for (Index j = 0; j < x.cols(); ++j) {
      EXPECT_GE(out.attacked.values().col(j).minCoeff(), x.lower()(j));
      EXPECT_LE(out.attacked.values().col(j).maxCoeff(), x.upper()(j));
    }
    for (Index i = 0; i < x.rows(); ++i) EXPECT_EQ(out.attacked.values()(i, 2), std::round(out.attacked.values()(i, 2)));
    const Vector rescored = target_scores(build_proximity_graph(out.attacked, cfg.proximity), targets, cfg.alpha);
    EXPECT_LT((rescored - out.scores_after).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(out.loss_trace.size(), 30u);
  }
}

TEST(RunFeatureAttack, AnomalyObjectiveLowersTargetScores) {
  // A tight cluster and a target paired only with node 23; attack node 24
  // sits just below epsilon from the target, inside the straight-through band.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.05);
  RowMatrix v(25, 3);
  for (Index i = 0; i < 25; ++i) v.row(i) << 1 + noise(rng), 0.2 + noise(rng), 0.1 + noise(rng);
  v.row(0) << 0.2, 1.0, 0.1;
  v.row(23) << 0.25, 1.0, 0.12;
  v.row(24) << 0.8, 1.0, 0.1;
  const FeatureMatrix x(v);
  FeatureAttackConfig cfg;
  cfg.k_prime = 3;
  cfg.epochs = 60;
  cfg.lr = 0.05;
  cfg.proximity = {Metric::cosine, 0.9};
  const auto out = run_feature_attack(x, {{5, 6, 24}, NodeOrigin::random, {}}, {0}, cfg);
  EXPECT_LT(out.scores_after.sum(), out.scores_before.sum());
}

TEST(RunFeatureAttack, GraphObjectiveNeedsGuidance) {
  std::mt19937_64 rng(10);
  const FeatureMatrix x = mixed_features(rng, 10);
  FeatureAttackConfig cfg;
  cfg.objective = FeatureObjective::graph;
  EXPECT_THROW(run_feature_attack(x, {}, {0}, cfg), InvalidArgument);
}

TEST(FeatureMethod, ParseRoundTrip) {
  for (auto m : {FeatureMethod::vanilla, FeatureMethod::guided_alter_i, FeatureMethod::guided_cf,
                 FeatureMethod::guided_plus})
    EXPECT_EQ(parse_feature_method(to_string(m)), m);
  EXPECT_THROW(parse_feature_method("nope"), InvalidArgument);
}

}  // namespace
}  // namespace rwad
