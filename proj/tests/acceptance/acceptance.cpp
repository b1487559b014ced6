// One line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rwad/rwad.hpp"
#include "support/cases.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"

namespace rwad {
namespace {

using testing::central_differences;
using testing::max_relative_error;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Solver equivalence on mixed random graphs.
Verdict criterion1() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int unconverged = 0;
  for (int i = 0; i < 50; ++i) {
    const Index n = std::uniform_int_distribution<Index>(2, 200)(rng);
    const bool directed = i % 2 == 1;
    const double density = std::uniform_real_distribution<double>(0.02, 0.3)(rng);
    const Index dangling = std::uniform_int_distribution<Index>(1, std::max<Index>(1, n / 10))(rng);
    const DenseGraph g = testing::random_graph(rng, n, directed, density, dangling);
    const TransitionMatrix p = normalize(g);
    const RestartVector r = i % 3 == 0 ? RestartVector::single(n, n / 2) : RestartVector::uniform(n);
    const StationaryResult it = stationary_iterative(p, r, kDefaultAlpha);
    if (!it.converged) ++unconverged;
    worst = std::max(worst, (it.scores - stationary_closed_form(p, r, kDefaultAlpha)).lpNorm<Eigen::Infinity>());
  }
  return {worst <= 1e-8 && unconverged == 0,
          "max L-inf gap " + fmt("%.3e", worst) + ", unconverged " + std::to_string(unconverged) + "/50"};
}

// Set-cover gadget: closed forms against the solvers and the separation
// condition, over sampled subsets of the addable arcs.
Verdict criterion2() {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  int checked = 0, separation_bad = 0;
  for (int i = 0; i < 20; ++i) {
    const Index nq = 4 + i % 5;
    const Index universe = std::uniform_int_distribution<Index>(3, std::min<Index>(12, 3 * nq))(rng);
    const Index k = std::uniform_int_distribution<Index>(1, nq - 1)(rng);
    const SetCoverInstance inst = random_set_cover(rng, universe, nq, k);
    const GadgetGraph g = build_directed_gadget(inst);
    const RestartVector r = RestartVector::uniform(g.size());
    // All 2^|Q| subsets up to 64, then a random sample.
    const std::uint32_t subsets = 1u << nq;
    for (int draw = 0; draw < 64; ++draw) {
      const std::uint32_t mask = subsets <= 64 ? static_cast<std::uint32_t>(draw) % subsets
                                               : std::uniform_int_distribution<std::uint32_t>(0, subsets - 1)(rng);
      if (subsets <= 64 && static_cast<std::uint32_t>(draw) >= subsets) break;
      std::vector<Index> added;
      for (Index s = 0; s < nq; ++s)
        if (mask & (1u << s)) added.push_back(s);
      const DenseGraph ga = with_added_sets(g, added);
      const Vector expected = lemma1_expected_scores(inst, added);
      const TransitionMatrix p = normalize(ga);
      const Vector cf = stationary_closed_form(p, r, g.alpha);
      const Vector it = stationary_iterative(p, r, g.alpha, 1e-15, 100000).scores;
      worst = std::max({worst, (cf - expected).lpNorm<Eigen::Infinity>(), (it - expected).lpNorm<Eigen::Infinity>()});
      double min_u = 1.0, max_rest = 0.0;
      for (Index v = 0; v < g.size(); ++v) {
        if (v < inst.universe)
          min_u = std::min(min_u, cf(v));
        else
          max_rest = std::max(max_rest, cf(v));
      }
      if ((min_u > max_rest + 1e-12) != inst.covers(added)) ++separation_bad;
      ++checked;
    }
  }
  return {worst <= 1e-10 && separation_bad == 0,
          std::to_string(checked) + " (instance, A) pairs, max gap " + fmt("%.3e", worst) + ", separation mismatches " +
              std::to_string(separation_bad)};
}

// Undirected gadget at alpha = 0: stationary values proportional to degree.
Verdict criterion3() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  int built = 0;
  while (built < 10) {
    const Index n = std::uniform_int_distribution<Index>(5, 9)(rng);
    const DenseGraph gp = random_simple_graph(rng, n, 0.45);
    if (gp.edge_count() == 0) continue;
    const Index k = std::uniform_int_distribution<Index>(2, n - 2)(rng);
    GadgetGraph g;
    try {
      g = build_undirected_gadget(gp, k);
    } catch (const NegativeFanSize&) {
      continue;
    }
    const Vector s = stationary_iterative(normalize(g.graph), RestartVector::uniform(g.size()), 0.0, 1e-15, 200000).scores;
    const Vector deg = g.graph.degrees();
    const Vector ratio = s.cwiseQuotient(deg / deg.sum());
    worst = std::max(worst, (ratio.array() - 1.0).abs().maxCoeff());
    ++built;
  }
  return {worst < 1e-8, "10 gadgets, max relative deviation " + fmt("%.3e", worst)};
}

// Analytic gradients against central differences on 10-node instances.
Verdict criterion4() {
  std::mt19937_64 rng(104);
  std::map<std::string, double> worst;
  double worst_abs = 0.0;
  auto record = [&](const std::string& name, const Vector& analytic, const Vector& numeric) {
    double& w = worst[name];
    w = std::max(w, max_relative_error(analytic, numeric));
    worst_abs = std::max(worst_abs, (analytic - numeric).cwiseAbs().maxCoeff());
  };
  for (Variant variant : {Variant::alter_i, Variant::closed_form}) {
    const std::string tag = to_string(variant);
    for (int trial = 0; trial < 5; ++trial) {
      const DenseGraph g = testing::random_graph(rng, 10, false, 0.4, trial % 2);
      const std::vector<Index> targets{1, 4, 7};
      const auto problem = GraphAttackProblem::prox(g, targets, 0.2);
      const auto b = testing::random_interior(problem.empty_perturbation(), rng);
      const Matrix carried = problem.initial_state() + 0.01 * Matrix::Random(10, 1).cwiseAbs();
      const SurrogateResult r = problem.evaluate(b, variant, carried, 1e-3);
      auto f = [&](const Vector& x) {
        PerturbationMatrix probe = b;
        probe.values() = x;
        return testing::reference_prox_surrogate(g, probe, targets, 0.2, variant, carried.col(0), 1e-3);
      };
      record("prox " + tag, r.grad, central_differences(f, b.values()));
    }
    for (int trial = 0; trial < 5; ++trial) {
      Matrix m(5, 5);
      std::bernoulli_distribution coin(0.5);
      for (Index i = 0; i < 5; ++i)
        for (Index j = 0; j < 5; ++j) m(i, j) = coin(rng) ? 1.0 : 0.0;
      const BipartiteGraph bg(m);
      const std::vector<Index> targets{0, 3};
      const auto problem = GraphAttackProblem::bigraph(bg, targets, 0.25);
      const auto b = testing::random_interior(problem.empty_perturbation(), rng);
      const Matrix carried = problem.initial_state();
      const SurrogateResult r = problem.evaluate(b, variant, carried, 1e-3);
      auto f = [&](const Vector& x) {
        PerturbationMatrix probe = b;
        probe.values() = x;
        return testing::reference_bigraph_surrogate(bg, probe, targets, 0.25, variant, carried, 1e-3);
      };
      record("bigraph " + tag, r.grad, central_differences(f, b.values()));
    }
  }
  for (Metric metric : {Metric::cosine, Metric::correlation}) {
    const ProximityConfig prox{metric, 0.3};
    for (int trial = 0; trial < 4; ++trial) {
      const RowMatrix x = testing::well_separated_features(rng, 10, 4, prox);
      const std::vector<Index> targets{0, 3};
      const std::vector<Index> z{1, 5, 8};
      Vector carried = stationary_closed_form(normalize(build_proximity_graph(x, prox)), RestartVector::uniform(10), 0.2);
      carried = (carried.array() + 0.01).matrix();
      for (Variant variant : {Variant::alter_i, Variant::closed_form}) {
        const Vector* cp = variant == Variant::alter_i ? &carried : nullptr;
        const FeatureGradient fg = feature_gradient_anomaly(x, targets, z, prox, 0.2, variant, cp, 0.0);
        auto f = [&](const Vector& flat) {
          return feature_loss_anomaly(testing::with_rows(x, z, flat), targets, prox, 0.2, variant, cp);
        };
        record("L_a " + to_string(variant), testing::flatten_rows(fg.grad, z),
               central_differences(f, testing::flatten_rows(x, z)));
      }
      GraphGuidance guide{PerturbationMatrix::full(10), Matrix::Zero(10, 10)};
      const Matrix sim = similarity_matrix(prepare_rows(x, prox.metric));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (Index e = 0; e < guide.discrete.support_size(); ++e) {
        if (unit(rng) > 0.3) continue;
        const auto& [u, v] = guide.discrete.pair(e);
        guide.discrete.values()(e) = 1.0;
        double target = unit(rng);
        if (std::abs(target - sim(u, v)) < 0.05) target = sim(u, v) > 0.5 ? 0.0 : 1.0;
        guide.attacked(u, v) = guide.attacked(v, u) = target;
      }
      const std::vector<Index> zg{2, 6};
      const FeatureGradient fg = feature_gradient_graph(x, guide, zg, prox);
      auto f = [&](const Vector& flat) { return feature_loss_graph(testing::with_rows(x, zg, flat), guide, zg, prox); };
      record("L_g", testing::flatten_rows(fg.grad, zg), central_differences(f, testing::flatten_rows(x, zg)));
    }
  }
  bool pass = true;
  std::ostringstream d;
  d << "max relative error (entries under 1e-9 absolute count as exact):";
  for (const auto& [name, w] : worst) {
    pass = pass && w < 1e-4;
    d << ' ' << name << ' ' << fmt("%.2e", w) << ';';
  }
  d << " max absolute error " << fmt("%.2e", worst_abs);
  return {pass, d.str()};
}

// cf-attack against RndAdd and the brute-force optimum on n = 8.
Verdict criterion5() {
  int good = 0, below_rnd = 0, near_bf = 0;
  double worst_gap = 0.0;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    std::mt19937_64 rng(derive_seed(5, {inst}));
    const DenseGraph g = random_simple_graph(rng, 8, 0.4);
    const std::vector<Index> targets =
        sample_targets(prox_anomaly_scores(g, kDefaultAlpha), 3, 1 + static_cast<Index>(inst % 2), derive_seed(6, {inst}));
    const Index k = 1 + static_cast<Index>((inst / 2) % 2);
    const GraphAttackProblem problem = GraphAttackProblem::prox(g, targets, kDefaultAlpha);
    GraphAttackConfig cfg;
    cfg.budget = k;
    cfg.variant = Variant::closed_form;
    cfg.lr = 0.01;
    const double cf = problem.target_score_sum(run_graph_attack(problem, cfg).attacked.weights());
    double rnd = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s)
      rnd += problem.target_score_sum(baseline_rnd_add(problem, k, s).attacked.weights()) / 10.0;
    const auto [add, rem] = all_pair_flips(g);
    const double bf = brute_force_attack(g, targets, k, add, rem, uniform_restart_scorer(kDefaultAlpha)).best_objective;
    const bool a = cf <= rnd + 1e-12, b = cf <= 1.1 * bf + 1e-12;
    below_rnd += a;
    near_bf += b;
    good += a && b;
    worst_gap = std::max(worst_gap, bf > 0.0 ? (cf - bf) / bf : 0.0);
  }
  return {good >= 16, std::to_string(good) + "/20 instances meet both bounds (<= RndAdd " + std::to_string(below_rnd) +
                          ", within 10% of optimum " + std::to_string(near_bf) + "), worst relative gap " +
                          fmt("%.4f", worst_gap)};
}

// Mean of a row field per (budget_index, method), skipping failed cells.
std::map<std::pair<Index, std::string>, double> mean_by_cell(const AttackReport& r,
                                                              const std::function<std::optional<double>(const ReportRow&)>& f) {
  std::map<std::pair<Index, std::string>, std::pair<double, int>> acc;
  for (const auto& row : r.rows) {
    const auto v = f(row);
    if (!v) continue;
    auto& [sum, count] = acc[{row.budget_index, row.method}];
    sum += *v;
    ++count;
  }
  std::map<std::pair<Index, std::string>, double> out;
  for (const auto& [key, sc] : acc) out[key] = sc.first / sc.second;
  return out;
}

ExperimentConfig graph_sweep(ModelKind model) {
  ExperimentConfig c;
  c.model = model;
  c.target_pool = model == ModelKind::prox ? 25 : 10;
  c.target_count = model == ModelKind::prox ? 10 : 5;
  c.trials = 10;
  c.seed = 606;
  return c;
}

struct SweepReports {
  AttackReport prox, bigraph;
};

const SweepReports& sweeps() {
  static const SweepReports r{run_experiment(graph_sweep(ModelKind::prox)), run_experiment(graph_sweep(ModelKind::bigraph))};
  return r;
}

bool trend_check(const std::string& name, const AttackReport& r, std::ostringstream& d) {
  const auto er = mean_by_cell(r, [](const ReportRow& row) { return row.er5; });
  const auto& budgets = r.config.budgets;
  bool pass = true;
  int errors = 0;
  for (const auto& row : r.rows) errors += !row.ok();
  d << name << " ER5";
  for (const std::string m : {"alterI", "cf", "rnd-add", "deg-add"}) {
    d << ' ' << m << '[';
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      d << (b ? " " : "") << fmt("%.3f", er.count({static_cast<Index>(b), m}) ? er.at({static_cast<Index>(b), m}) : -1.0);
    }
    d << ']';
  }
  // A drop in ER is reported next to the mean target score over the same
  // step, which tells a worse attack apart from a rank effect.
  const auto score = mean_by_cell(r, [](const ReportRow& row) { return row.mean_after; });
  for (const std::string m : {"alterI", "cf"})
    for (std::size_t b = 1; b < budgets.size(); ++b) {
      const Index bi = static_cast<Index>(b);
      if (er.at({bi, m}) >= er.at({bi - 1, m})) continue;
      pass = false;
      d << " [drop: " << m << " ER5 " << fmt("%.3f", er.at({bi - 1, m})) << " -> " << fmt("%.3f", er.at({bi, m}))
        << " at budget " << fmt("%.1f", budgets[b]) << ", mean target score " << fmt("%.6f", score.at({bi - 1, m}))
        << " -> " << fmt("%.6f", score.at({bi, m})) << ']';
    }
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    if (budgets[b] < 0.4 - 1e-12) continue;
    const Index bi = static_cast<Index>(b);
    const double ours = std::min(er.at({bi, "alterI"}), er.at({bi, "cf"}));
    const double base = std::max(er.at({bi, "rnd-add"}), er.at({bi, "deg-add"}));
    if (!(ours > base)) pass = false;
  }
  if (errors) {
    d << " (" << errors << " failed cells)";
    pass = false;
  }
  return pass;
}

// Graph-space trends on the synthetic prox and bipartite benchmarks.
Verdict criterion6() {
  std::ostringstream d;
  const bool a = trend_check("prox", sweeps().prox, d);
  d << "; ";
  const bool b = trend_check("bigraph", sweeps().bigraph, d);
  return {a && b, d.str()};
}

// Feature-space ordering on the prox benchmark.
Verdict criterion7() {
  ExperimentConfig c = graph_sweep(ModelKind::prox);
  c.space = AttackSpace::feature;
  c.target_rule = TargetRule::labels;
  c.target_count = 0;
  c.budgets = {1.0};
  const AttackReport r = run_experiment(c);
  const auto reduction =
      mean_by_cell(r, [](const ReportRow& row) -> std::optional<double> {
        if (!row.mean_after) return std::nullopt;
        return row.mean_before - *row.mean_after;
      });
  const double van = reduction.at({0, "vanilla"}), ai = reduction.at({0, "g-guided-alterI"}),
               gcf = reduction.at({0, "g-guided-cf"}), plus = reduction.at({0, "g-guided-plus"});
  std::map<int, std::map<std::string, std::optional<double>>> er10;
  for (const auto& row : r.rows) er10[row.trial][row.method] = row.er10;
  int wins = 0;
  for (const auto& [trial, by] : er10) {
    const auto& p = by.at("g-guided-plus");
    if (!p || *p <= 0.0) continue;
    bool best = true;
    for (const auto& [m, v] : by)
      if (m != "g-guided-plus" && v && *v > *p) best = false;
    wins += best;
  }
  int errors = 0;
  for (const auto& row : r.rows) errors += !row.ok();
  const bool pass = van < ai && ai <= gcf && wins >= 6;
  return {pass, "mean reduction vanilla " + fmt("%.5f", van) + ", g-guided-alterI " + fmt("%.5f", ai) +
                    ", g-guided-cf " + fmt("%.5f", gcf) + ", g-guided-plus " + fmt("%.5f", plus) +
                    "; g-guided-plus best ER10 in " + std::to_string(wins) + "/10 trials; failed cells " +
                    std::to_string(errors)};
}

// Clean AUC on the synthetic benchmarks.
Verdict criterion8() {
  auto min_auc = [](const AttackReport& r) {
    double m = 1.0;
    for (const auto& row : r.rows)
      if (row.clean_auc) m = std::min(m, *row.clean_auc);
    return m;
  };
  const double p = min_auc(sweeps().prox), b = min_auc(sweeps().bigraph);
  return {p >= 0.9 && b >= 0.9, "min clean AUC over 10 trials: prox " + fmt("%.4f", p) + ", bigraph " + fmt("%.4f", b)};
}

Verdict criterion9() {
  const testing::PropertyTally t = testing::run_property_cases(10000, 909);
  std::ostringstream d;
  d << t.total << " cases (";
  bool first = true;
  for (const auto& [name, count] : t.cases) {
    d << (first ? "" : ", ") << name << ' ' << count;
    first = false;
  }
  d << "), " << t.failed << " violations";
  if (!t.failures.empty()) d << "; first: " << t.failures.front();
  return {t.failed == 0 && t.total == 10000, d.str()};
}

// Rows regenerated in isolation, and whole reports across runs.
Verdict criterion10() {
  ExperimentConfig c = graph_sweep(ModelKind::prox);
  c.data.feature_spec.normal = 190;
  c.trials = 3;
  c.graph_attack.epochs = 20;
  const AttackReport a = run_experiment(c);
  const AttackReport b = run_experiment(c);
  std::ostringstream ja, jb;
  write_report_jsonl(ja, a);
  write_report_jsonl(jb, b);
  int same = 0, tried = 0;
  std::mt19937_64 rng(1010);
  for (int i = 0; i < 8; ++i) {
    const ReportRow& row = a.rows[std::uniform_int_distribution<std::size_t>(0, a.rows.size() - 1)(rng)];
    same += row_line(run_row(c, row.trial, row.budget_index, row.method), a.hash) == row_line(row, a.hash);
    ++tried;
  }
  // The sweep reports built for criteria 6 and 8 get one spot check each.
  for (const AttackReport* r : {&sweeps().prox, &sweeps().bigraph}) {
    const ReportRow& row = r->rows[r->rows.size() / 2 + 1];
    same += row_line(run_row(r->config, row.trial, row.budget_index, row.method), r->hash) == row_line(row, r->hash);
    ++tried;
  }
  const bool runs = ja.str() == jb.str();
  return {same == tried && runs, std::to_string(same) + "/" + std::to_string(tried) +
                                     " regenerated rows byte-identical; repeated sweep " +
                                     (runs ? "identical" : "differs")};
}

}  // namespace
}  // namespace rwad

int main() {
  using namespace rwad;
  const std::vector<std::function<Verdict()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                          criterion6, criterion7, criterion8, criterion9, criterion10};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i]();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !v.pass;
    std::printf("criterion %zu: %s (%s; %.1f s)\n", i + 1, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
