// Command-line front end: detection, graph- and feature-space attacks,
// gadget construction and checks, and config-driven sweeps.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "rwad/rwad.hpp"

namespace {

using namespace rwad;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct DataOptions {
  std::string model = "prox";
  std::string input;
  std::string labels;
  std::string metric = "cosine";
  double epsilon = 0.8;
  double alpha = kDefaultAlpha;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Detector")->check(CLI::IsMember({"bigraph", "prox"}));
    app->add_option("--input", input, "Feature CSV (prox) or u,v edge CSV (bigraph)")->required();
    app->add_option("--labels", labels, "CSV of anomalous node ids, for AUC and label targets");
    app->add_option("--metric", metric, "Proximity metric")->check(CLI::IsMember({"cosine", "correlation"}));
    app->add_option("--epsilon", epsilon, "Proximity threshold");
    app->add_option("--alpha", alpha, "Restart probability");
  }

  ProximityConfig proximity() const { return {parse_metric(metric), epsilon}; }
};

/// Loaded data with clean scores; feature labels come from a label column
/// unless --labels is given.
struct Dataset {
  ModelKind model = ModelKind::prox;
  FeatureMatrix features;
  std::vector<std::string> columns;
  DenseGraph graph;
  BipartiteGraph bipartite;
  std::vector<bool> labels;
  AnomalyScores scores;
};

Dataset load(const DataOptions& o) {
  Dataset d;
  d.model = parse_model(o.model);
  if (d.model == ModelKind::prox) {
    LoadedFeatures f = load_feature_csv(o.input);
    for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
    d.features = std::move(f.features);
    d.columns = std::move(f.columns);
    d.labels = std::move(f.labels);
    if (!o.labels.empty()) d.labels = load_node_labels(o.labels, d.features.rows());
    d.graph = build_proximity_graph(d.features, o.proximity());
    d.scores = prox_anomaly_scores(d.graph, o.alpha);
  } else {
    LoadedBipartite b = load_bipartite_edges(o.input);
    for (const auto& w : b.warnings) std::cerr << "warning: " << w << '\n';
    d.bipartite = std::move(b.graph);
    if (!o.labels.empty()) d.labels = load_node_labels(o.labels, d.bipartite.v_size());
    d.scores = bigraph_anomaly_scores(d.bipartite, o.alpha);
  }
  return d;
}

struct TargetOptions {
  std::vector<Index> explicit_targets;
  Index pool = 100;
  Index count = 0;
  bool from_labels = false;

  void add(CLI::App* app) {
    app->add_option("--targets", explicit_targets, "Target node ids (V-node ids for bigraph)")->delimiter(',');
    app->add_option("--target-pool", pool, "Sample targets from this many top-scored nodes");
    app->add_option("--target-count", count, "Number of sampled targets (default 20 prox, 5 bigraph)");
    app->add_flag("--label-targets", from_labels, "Use the labelled anomalies as targets");
  }

  std::vector<Index> pick(const Dataset& d, std::uint64_t seed) const {
    if (!explicit_targets.empty()) {
      for (Index t : explicit_targets)
        if (t < 0 || t >= d.scores.size()) throw InvalidArgument("target " + std::to_string(t) + " out of range");
      std::vector<Index> t = explicit_targets;
      std::sort(t.begin(), t.end());
      t.erase(std::unique(t.begin(), t.end()), t.end());
      return t;
    }
    if (from_labels) {
      std::vector<Index> t;
      for (Index v = 0; v < static_cast<Index>(d.labels.size()); ++v)
        if (d.labels[static_cast<std::size_t>(v)]) t.push_back(v);
      if (t.empty()) throw DataError("--label-targets needs labelled anomalies");
      return t;
    }
    const Index n = d.scores.size();
    const Index p = std::min(pool, n);
    const Index c = std::min(count > 0 ? count : (d.model == ModelKind::prox ? 20 : 5), p);
    return sample_targets(d.scores, p, c, seed);
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path + "'");
  return f;
}

Json er_summary(const AnomalyScores& s, const std::vector<Index>& targets) {
  return Json{{"er5", evasion_rate(s, targets, 0.05)},
              {"er10", evasion_rate(s, targets, 0.10)},
              {"mean_score", mean_of(s, targets)}};
}

int cmd_detect(const DataOptions& o, const std::string& out) {
  const Dataset d = load(o);
  if (out.empty() || out == "-") {
    write_scores_csv(std::cout, d.scores);
  } else {
    std::ofstream f = open_out(out);
    write_scores_csv(f, d.scores);
  }
  const bool both = std::count(d.labels.begin(), d.labels.end(), true) > 0 &&
                    std::count(d.labels.begin(), d.labels.end(), false) > 0;
  if (both) std::cerr << "auc " << auc(d.scores.values, d.labels) << '\n';
  return kOk;
}

struct GraphAttackOptions {
  std::string method = "cf";
  double budget_prop = 0.1;
  Index budget = -1;
  GraphAttackConfig cfg;
  std::string step_rule = "normalized";
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--method", method, "Attack")->check(CLI::IsMember({"alterI", "cf", "rnd-add", "deg-add"}));
    app->add_option("--budget-prop", budget_prop, "Budget as a fraction of the target degree sum");
    app->add_option("--budget", budget, "Absolute budget K (overrides --budget-prop)");
    app->add_option("--epochs", cfg.epochs, "Optimization epochs");
    app->add_option("--lr", cfg.lr, "Learning rate");
    app->add_option("--lambda", cfg.lambda, "Perturbation mass penalty");
    app->add_option("--step-rule", step_rule, "Optimizer step")->check(CLI::IsMember({"normalized", "adam", "sgd"}));
    app->add_option("--seed", cfg.seed, "Seed for target sampling and rnd-add");
    app->add_option("--out", out, "Write the attacked graph as an edge list");
  }
};

int cmd_attack_graph(const DataOptions& o, const TargetOptions& t, GraphAttackOptions a) {
  const Dataset d = load(o);
  const std::vector<Index> targets = t.pick(d, derive_seed(a.cfg.seed, {3}));
  const Index k = a.budget >= 0 ? a.budget
                                : (d.model == ModelKind::prox ? budget_from_proportion(d.graph, targets, a.budget_prop)
                                                              : budget_from_proportion(d.bipartite, targets, a.budget_prop));
  const GraphAttackProblem problem = d.model == ModelKind::prox ? GraphAttackProblem::prox(d.graph, targets, o.alpha)
                                                                : GraphAttackProblem::bigraph(d.bipartite, targets, o.alpha);
  a.cfg.budget = k;
  a.cfg.alpha = o.alpha;
  a.cfg.step_rule = parse_step_rule(a.step_rule);
  GraphAttackOutcome out;
  if (a.method == "rnd-add")
    out = baseline_rnd_add(problem, k, derive_seed(a.cfg.seed, {4}));
  else if (a.method == "deg-add")
    out = baseline_deg_add(problem, k);
  else {
    a.cfg.variant = parse_variant(a.method);
    out = run_graph_attack(problem, a.cfg);
  }
  const AnomalyScores after = d.model == ModelKind::prox
                                  ? prox_anomaly_scores(out.attacked, o.alpha)
                                  : bigraph_anomaly_scores(attacked_bipartite(out, d.bipartite.u_size()), o.alpha);
  if (!a.out.empty()) {
    std::ofstream f = open_out(a.out);
    if (d.model == ModelKind::prox)
      write_edge_list(f, out.attacked);
    else
      write_bipartite_edges(f, attacked_bipartite(out, d.bipartite.u_size()));
  }
  // Modified pairs are reported in the detector's own indexing: V-node ids
  // for the V side of a bipartite graph.
  Json edges = Json::array();
  for (const auto& [u, v] : out.modified_edges)
    edges.push_back(d.model == ModelKind::prox ? Json{u, v} : Json{u, v - d.bipartite.u_size()});
  std::cout << Json{{"method", a.method},
                    {"targets", targets},
                    {"budget", k},
                    {"shortfall", out.shortfall},
                    {"modified_edges", edges},
                    {"before", er_summary(d.scores, targets)},
                    {"after", er_summary(after, targets)}}
                   .dump(2)
            << '\n';
  return kOk;
}

struct FeatureAttackOptions {
  std::string method = "g-guided-plus";
  Index k_prime = 0;
  double budget_prop = 1.0;
  FeatureAttackConfig cfg;
  GraphAttackConfig guide;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--method", method, "Attack")
        ->check(CLI::IsMember({"vanilla", "g-guided-alterI", "g-guided-cf", "g-guided-plus"}));
    app->add_option("--k-prime", k_prime, "Attack node count (0: from the guiding graph attack)");
    app->add_option("--budget-prop", budget_prop, "Budget of the guiding alterI attack");
    app->add_option("--epochs", cfg.epochs, "Feature optimization epochs");
    app->add_option("--lr", cfg.lr, "Feature step in units of column box width");
    app->add_option("--guide-epochs", guide.epochs, "Epochs of the guiding graph attack");
    app->add_option("--guide-lr", guide.lr, "Learning rate of the guiding graph attack");
    app->add_option("--seed", cfg.seed, "Seed for target sampling and random attack nodes");
    app->add_option("--out", out, "Write the attacked features as CSV");
  }
};

int cmd_attack_feature(const DataOptions& o, const TargetOptions& t, FeatureAttackOptions a) {
  if (o.model != "prox") throw InvalidArgument("feature-space attacks need --model prox");
  const Dataset d = load(o);
  const std::vector<Index> targets = t.pick(d, derive_seed(a.cfg.seed, {3}));
  a.guide.alpha = o.alpha;
  a.guide.variant = Variant::alter_i;
  a.guide.budget = budget_from_proportion(d.graph, targets, a.budget_prop);
  const GraphAttackOutcome guide = run_graph_attack(d.graph, targets, a.guide);
  const Index k_prime = a.k_prime > 0 ? a.k_prime : guided_node_count(guide, targets);
  if (k_prime == 0) throw EmptyGuidance("graph-space guidance touches no non-target node");
  a.cfg.k_prime = k_prime;
  a.cfg.proximity = o.proximity();
  a.cfg.alpha = o.alpha;
  const FeatureAttackOutcome out = run_feature_method(parse_feature_method(a.method), d.features, targets, &guide, a.cfg);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  if (!a.out.empty()) {
    std::ofstream f = open_out(a.out);
    write_feature_csv(f, out.attacked, d.columns);
  }
  std::cout << Json{{"method", a.method},
                    {"targets", targets},
                    {"guide_budget", a.guide.budget},
                    {"k_prime", k_prime},
                    {"attack_nodes", out.nodes.nodes},
                    {"before", er_summary(d.scores, targets)},
                    {"after", er_summary(prox_anomaly_scores(out.graph, o.alpha), targets)}}
                   .dump(2)
            << '\n';
  return kOk;
}

struct GadgetOptions {
  std::string kind = "thm1";
  Index universe = 6;
  Index sets = 4;
  Index k = 2;
  Index nodes = 6;
  double p = 0.4;
  std::uint64_t seed = 0;
  int instances = 10;
  bool allow_small = false;
  std::string out;
};

Json gadget_summary(const GadgetGraph& g) {
  Json roles = Json::array();
  for (const auto& r : g.roles) roles.push_back(r.label());
  return Json{{"nodes", g.size()},     {"directed", g.graph.directed()}, {"alpha", g.alpha},
              {"theta", g.theta},      {"budget", g.budget},             {"targets", g.targets},
              {"addable", g.addable},  {"removable", g.removable},       {"roles", roles}};
}

int cmd_gadget_build(const GadgetOptions& o) {
  std::mt19937_64 rng(o.seed);
  GadgetGraph g;
  if (o.kind == "thm1") {
    const SetCoverInstance inst = random_set_cover(rng, o.universe, o.sets, o.k);
    g = build_directed_gadget(inst, o.allow_small);
  } else {
    g = build_undirected_gadget(random_simple_graph(rng, o.nodes, o.p), o.k);
  }
  if (!o.out.empty()) {
    std::ofstream f = open_out(o.out);
    write_edge_list(f, g.graph);
  }
  std::cout << gadget_summary(g).dump() << '\n';
  return kOk;
}

/// thm1: stationary values against the closed forms and the cover-iff-
/// separation condition. thm2: degree proportionality at alpha = 0.
int cmd_gadget_verify(const GadgetOptions& o) {
  std::mt19937_64 rng(o.seed);
  int failures = 0;
  for (int i = 0; i < o.instances; ++i) {
    Json line{{"instance", i}};
    bool ok = true;
    if (o.kind == "thm1") {
      const Index nq = std::uniform_int_distribution<Index>(4, 8)(rng);
      const Index universe = std::uniform_int_distribution<Index>(3, std::min<Index>(12, 3 * nq))(rng);
      const SetCoverInstance inst = random_set_cover(rng, universe, nq, 2);
      const GadgetGraph g = build_directed_gadget(inst);
      std::vector<Index> added;
      for (Index s = 0; s < nq; ++s)
        if (std::bernoulli_distribution(0.5)(rng)) added.push_back(s);
      const Vector s = stationary_closed_form(normalize(with_added_sets(g, added)),
                                              RestartVector::uniform(g.size()), g.alpha);
      const double err = (s - lemma1_expected_scores(inst, added)).cwiseAbs().maxCoeff();
      double min_u = 1.0, max_rest = 0.0;
      for (Index v = 0; v < g.size(); ++v) {
        if (v < inst.universe)
          min_u = std::min(min_u, s(v));
        else
          max_rest = std::max(max_rest, s(v));
      }
      const bool separated = min_u > max_rest + 1e-12;
      ok = err < 1e-10 && separated == inst.covers(added);
      line.update(Json{{"sets", nq}, {"universe", universe}, {"added", added}, {"max_error", err},
                       {"covers", inst.covers(added)}, {"separated", separated}});
    } else {
      const DenseGraph gp = random_simple_graph(rng, o.nodes, o.p);
      const GadgetGraph g = build_undirected_gadget(gp, o.k);
      const Vector s =
          stationary_iterative(normalize(g.graph), RestartVector::uniform(g.size()), 0.0, 1e-15, 200000).scores;
      const Vector deg = g.graph.degrees();
      const double dev = (s.cwiseQuotient(deg / deg.sum()).array() - 1.0).abs().maxCoeff();
      ok = dev < 1e-8;
      line.update(Json{{"nodes", g.size()}, {"max_relative_deviation", dev}});
    }
    line["ok"] = ok;
    failures += ok ? 0 : 1;
    std::cout << line.dump() << '\n';
  }
  std::cerr << (o.instances - failures) << "/" << o.instances << " instances verified\n";
  return failures == 0 ? kOk : kNumeric;
}

int cmd_eval(const std::string& config, const std::string& out, const std::string& row) {
  ExperimentConfig cfg = load_config(config);
  if (!out.empty()) cfg.output = out;
  if (!row.empty()) {
    // trial,budget_index,method
    std::istringstream in(row);
    std::string trial, budget, method;
    if (!std::getline(in, trial, ',') || !std::getline(in, budget, ',') || !std::getline(in, method))
      throw InvalidArgument("--row expects trial,budget_index,method");
    const ReportRow r = run_row(cfg, std::stoi(trial), std::stol(budget), method);
    std::cout << row_line(r, config_hash(cfg)) << '\n';
    return kOk;
  }
  const AttackReport rep = run_experiment(cfg);
  if (cfg.output.empty()) {
    write_report_jsonl(std::cout, rep);
  } else {
    const ReportPaths p = write_report(rep, cfg.output);
    std::cerr << "wrote " << p.jsonl << ", " << p.csv << ", " << p.timing << '\n';
  }
  std::size_t failed = 0;
  for (const auto& r : rep.rows) failed += r.ok() ? 0 : 1;
  if (failed > 0) std::cerr << failed << " of " << rep.rows.size() << " cells failed\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-walk anomaly detection and attacks"};
  app.require_subcommand(1);

  DataOptions detect_data;
  std::string detect_out;
  auto* detect = app.add_subcommand("detect", "Score nodes with BiGraphRW or ProxGraphRW");
  detect_data.add(detect);
  detect->add_option("--out", detect_out, "Scores CSV (default stdout)");

  DataOptions ag_data;
  TargetOptions ag_targets;
  GraphAttackOptions ag;
  auto* attack_graph = app.add_subcommand("attack-graph", "Graph-space attack on the detector's graph");
  ag_data.add(attack_graph);
  ag_targets.add(attack_graph);
  ag.add(attack_graph);

  DataOptions af_data;
  TargetOptions af_targets;
  FeatureAttackOptions af;
  auto* attack_feature = app.add_subcommand("attack-feature", "Feature-space attack on ProxGraphRW");
  af_data.add(attack_feature);
  af_targets.add(attack_feature);
  af.add(attack_feature);

  GadgetOptions go;
  auto* gadget = app.add_subcommand("gadget", "Hardness gadgets");
  gadget->require_subcommand(1);
  for (auto* sub : {gadget->add_subcommand("build", "Build one gadget"),
                    gadget->add_subcommand("verify", "Check random gadgets against their closed forms")}) {
    sub->add_option("--kind", go.kind, "thm1: set-cover gadget; thm2: clique gadget")
        ->check(CLI::IsMember({"thm1", "thm2"}));
    sub->add_option("--universe", go.universe, "thm1 universe size");
    sub->add_option("--sets", go.sets, "thm1 number of 3-sets");
    sub->add_option("--k", go.k, "Set-cover budget (thm1) or clique size (thm2)");
    sub->add_option("--nodes", go.nodes, "thm2 base graph size");
    sub->add_option("--p", go.p, "thm2 base graph edge probability");
    sub->add_option("--seed", go.seed, "Seed");
    if (sub->get_name() == "build") {
      sub->add_flag("--allow-small", go.allow_small, "Allow fewer than 4 sets (shape only)");
      sub->add_option("--out", go.out, "Write the gadget as an edge list");
    } else {
      sub->add_option("--instances", go.instances, "Number of random instances");
    }
  }

  std::string eval_config, eval_out, eval_row;
  auto* eval = app.add_subcommand("eval", "Run a sweep from an experiment config");
  eval->add_option("--config", eval_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Report path (overrides the config)");
  eval->add_option("--row", eval_row, "Recompute one row: trial,budget_index,method");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*detect) return cmd_detect(detect_data, detect_out);
    if (*attack_graph) return cmd_attack_graph(ag_data, ag_targets, ag);
    if (*attack_feature) return cmd_attack_feature(af_data, af_targets, af);
    if (*gadget) return gadget->got_subcommand("build") ? cmd_gadget_build(go) : cmd_gadget_verify(go);
    if (*eval) return cmd_eval(eval_config, eval_out, eval_row);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
