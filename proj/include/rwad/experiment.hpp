#pragma once

// Experiment orchestration: a JSON config describes data, detector, target
// sampling, the budget schedule and the methods to sweep; run_experiment
// produces one report row per (trial, budget, method) cell.
//
// Seeds: every trial draws from derive_seed(seed, {trial}), and every row
// from that trial seed plus its (budget, method) position, so any single row
// can be recomputed on its own with run_row.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwad/errors.hpp"
#include "rwad/feature_attack.hpp"
#include "rwad/graph_attack.hpp"
#include "rwad/io.hpp"
#include "rwad/metrics.hpp"
#include "rwad/models.hpp"
#include "rwad/synthetic.hpp"

namespace rwad {

using Json = nlohmann::ordered_json;

enum class AttackSpace { graph, feature };
enum class TargetRule { top_pool, labels };

inline std::string to_string(AttackSpace s) { return s == AttackSpace::graph ? "graph" : "feature"; }
inline std::string to_string(TargetRule r) { return r == TargetRule::top_pool ? "top_pool" : "labels"; }

inline const std::vector<std::string>& graph_methods() {
  static const std::vector<std::string> m{"alterI", "cf", "rnd-add", "deg-add"};
  return m;
}

inline const std::vector<std::string>& feature_methods() {
  static const std::vector<std::string> m{"vanilla", "g-guided-alterI", "g-guided-cf", "g-guided-plus"};
  return m;
}

/// Synthetic generator parameters or input files. For prox the features
/// file is required; for bigraph the edges file. `labels` is an optional
/// node-id list of anomalies (feature files may carry a label column instead).
struct DataSource {
  bool synthetic = true;
  std::string features;
  std::string edges;
  std::string labels;
  FeatureSpec feature_spec;
  BipartiteSpec bipartite_spec;
  InjectionSpec injection;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::prox;
  AttackSpace space = AttackSpace::graph;
  DataSource data;
  ProximityConfig proximity;
  double alpha = kDefaultAlpha;
  TargetRule target_rule = TargetRule::top_pool;
  Index target_pool = 100;
  Index target_count = 0;  // 0: 20 for prox, 5 for bigraph; with labels, all anomalies
  std::vector<double> budgets{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<std::string> methods;  // empty: every method of the attack space
  GraphAttackConfig graph_attack;
  FeatureAttackConfig feature_attack;
  Index k_prime = 0;  // 0: non-target endpoints of the guiding alterI attack
  int trials = 1;
  std::uint64_t seed = 0;
  std::string output;

  Index default_count() const { return model == ModelKind::prox ? 20 : 5; }

  const std::vector<std::string>& method_list() const {
    if (!methods.empty()) return methods;
    return space == AttackSpace::graph ? graph_methods() : feature_methods();
  }

  void validate() const {
    if (trials < 1) throw InvalidArgument("trials must be at least 1");
    if (budgets.empty()) throw InvalidArgument("budget schedule is empty");
    for (double p : budgets)
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("budget proportions must lie in [0, 1]");
    if (target_pool < 1) throw InvalidArgument("target pool must be at least 1");
    if (target_count < 0) throw InvalidArgument("target count must be non-negative");
    if (k_prime < 0) throw InvalidArgument("k_prime must be non-negative");
    if (space == AttackSpace::feature && model != ModelKind::prox)
      throw InvalidArgument("feature-space attacks need the prox model");
    const auto& allowed = space == AttackSpace::graph ? graph_methods() : feature_methods();
    for (const auto& m : method_list())
      if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
        throw InvalidArgument("method '" + m + "' is not a " + to_string(space) + "-space method");
    if (!data.synthetic) {
      if (model == ModelKind::prox && data.features.empty()) throw InvalidArgument("prox data needs a features file");
      if (model == ModelKind::bigraph && data.edges.empty()) throw InvalidArgument("bigraph data needs an edges file");
    }
    proximity.validate();
    require_alpha(alpha);
    GraphAttackConfig g = graph_attack;
    g.alpha = alpha;
    g.validate();
    FeatureAttackConfig f = feature_attack;
    f.proximity = proximity;
    f.alpha = alpha;
    f.validate();
  }
};

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw InvalidArgument("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  const FeatureSpec& f = c.data.feature_spec;
  const BipartiteSpec& b = c.data.bipartite_spec;
  const InjectionSpec& inj = c.data.injection;
  Json data;
  if (c.data.synthetic) {
    data["source"] = "synthetic";
    if (c.model == ModelKind::prox)
      data["synthetic"] = {{"normal", f.normal}, {"outliers", f.outliers}, {"clusters", f.clusters},
                           {"dims", f.dims}, {"cluster_noise", f.cluster_noise},
                           {"cluster_noise_hi", f.cluster_noise_hi}, {"mix_lo", f.mix_lo}, {"mix_hi", f.mix_hi},
                           {"outlier_noise", f.outlier_noise}, {"outlier_groups", f.outlier_groups},
                           {"discrete_columns", f.discrete_columns}, {"discrete_scale", f.discrete_scale}};
    else
      data["synthetic"] = {{"u_nodes", b.u_nodes}, {"v_nodes", b.v_nodes}, {"communities", b.communities},
                           {"p_in", b.p_in}, {"p_out", b.p_out}, {"min_degree", b.min_degree},
                           {"fraction", inj.fraction}, {"min_edges", inj.min_edges},
                           {"max_edges", inj.max_edges}, {"quartile", inj.quartile}};
  } else {
    data["source"] = "file";
    if (!c.data.features.empty()) data["features"] = c.data.features;
    if (!c.data.edges.empty()) data["edges"] = c.data.edges;
    if (!c.data.labels.empty()) data["labels"] = c.data.labels;
  }
  const GraphAttackConfig& g = c.graph_attack;
  const FeatureAttackConfig& fa = c.feature_attack;
  return Json{{"model", to_string(c.model)},
              {"space", to_string(c.space)},
              {"data", data},
              {"proximity", {{"metric", to_string(c.proximity.metric)}, {"epsilon", c.proximity.epsilon}}},
              {"alpha", c.alpha},
              {"targets",
               {{"rule", to_string(c.target_rule)}, {"pool", c.target_pool}, {"count", c.target_count}}},
              {"budgets", c.budgets},
              {"methods", c.method_list()},
              {"graph_attack",
               {{"epochs", g.epochs}, {"lr", g.lr}, {"lambda", g.lambda}, {"step_rule", to_string(g.step_rule)}}},
              {"feature_attack",
               {{"epochs", fa.epochs},
                {"lr", fa.lr},
                {"band", fa.band},
                {"full_flip_guidance", fa.full_flip_guidance},
                {"k_prime", c.k_prime}}},
              {"trials", c.trials},
              {"seed", c.seed},
              {"output", c.output}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::read;
  detail::reject_unknown(j, {"model", "space", "data", "proximity", "alpha", "targets", "budgets", "methods",
                             "graph_attack", "feature_attack", "trials", "seed", "output"},
                         "config");
  ExperimentConfig c;
  try {
    if (j.contains("model")) c.model = parse_model(j.at("model").get<std::string>());
    if (j.contains("space")) {
      const auto s = j.at("space").get<std::string>();
      if (s != "graph" && s != "feature") throw InvalidArgument("space must be 'graph' or 'feature'");
      c.space = s == "graph" ? AttackSpace::graph : AttackSpace::feature;
    }
    if (j.contains("data")) {
      const Json& d = j.at("data");
      detail::reject_unknown(d, {"source", "features", "edges", "labels", "synthetic"}, "data");
      const std::string src = d.value("source", std::string("synthetic"));
      if (src != "synthetic" && src != "file") throw InvalidArgument("data.source must be 'synthetic' or 'file'");
      c.data.synthetic = src == "synthetic";
      read(d, "features", c.data.features);
      read(d, "edges", c.data.edges);
      read(d, "labels", c.data.labels);
      if (d.contains("synthetic")) {
        const Json& s = d.at("synthetic");
        detail::reject_unknown(s, {"normal", "outliers", "clusters", "dims", "cluster_noise", "cluster_noise_hi",
                                   "mix_lo", "mix_hi", "outlier_noise", "outlier_groups", "discrete_columns",
                                   "discrete_scale", "u_nodes", "v_nodes", "communities", "p_in", "p_out",
                                   "min_degree", "fraction", "min_edges", "max_edges", "quartile"},
                               "data.synthetic");
        FeatureSpec& f = c.data.feature_spec;
        read(s, "normal", f.normal);
        read(s, "outliers", f.outliers);
        read(s, "clusters", f.clusters);
        read(s, "dims", f.dims);
        read(s, "cluster_noise", f.cluster_noise);
        read(s, "cluster_noise_hi", f.cluster_noise_hi);
        read(s, "mix_lo", f.mix_lo);
        read(s, "mix_hi", f.mix_hi);
        read(s, "outlier_noise", f.outlier_noise);
        read(s, "outlier_groups", f.outlier_groups);
        read(s, "discrete_columns", f.discrete_columns);
        read(s, "discrete_scale", f.discrete_scale);
        BipartiteSpec& b = c.data.bipartite_spec;
        read(s, "u_nodes", b.u_nodes);
        read(s, "v_nodes", b.v_nodes);
        read(s, "communities", b.communities);
        read(s, "p_in", b.p_in);
        read(s, "p_out", b.p_out);
        read(s, "min_degree", b.min_degree);
        InjectionSpec& inj = c.data.injection;
        read(s, "fraction", inj.fraction);
        read(s, "min_edges", inj.min_edges);
        read(s, "max_edges", inj.max_edges);
        read(s, "quartile", inj.quartile);
      }
    }
    if (j.contains("proximity")) {
      const Json& p = j.at("proximity");
      detail::reject_unknown(p, {"metric", "epsilon"}, "proximity");
      if (p.contains("metric")) c.proximity.metric = parse_metric(p.at("metric").get<std::string>());
      read(p, "epsilon", c.proximity.epsilon);
    }
    read(j, "alpha", c.alpha);
    if (j.contains("targets")) {
      const Json& t = j.at("targets");
      detail::reject_unknown(t, {"rule", "pool", "count"}, "targets");
      const std::string rule = t.value("rule", std::string("top_pool"));
      if (rule != "top_pool" && rule != "labels") throw InvalidArgument("targets.rule must be 'top_pool' or 'labels'");
      c.target_rule = rule == "top_pool" ? TargetRule::top_pool : TargetRule::labels;
      read(t, "pool", c.target_pool);
      read(t, "count", c.target_count);
    }
    read(j, "budgets", c.budgets);
    read(j, "methods", c.methods);
    if (j.contains("graph_attack")) {
      const Json& g = j.at("graph_attack");
      detail::reject_unknown(g, {"epochs", "lr", "lambda", "step_rule"}, "graph_attack");
      read(g, "epochs", c.graph_attack.epochs);
      read(g, "lr", c.graph_attack.lr);
      read(g, "lambda", c.graph_attack.lambda);
      if (g.contains("step_rule")) c.graph_attack.step_rule = parse_step_rule(g.at("step_rule").get<std::string>());
    }
    if (j.contains("feature_attack")) {
      const Json& f = j.at("feature_attack");
      detail::reject_unknown(f, {"epochs", "lr", "band", "full_flip_guidance", "k_prime"}, "feature_attack");
      read(f, "epochs", c.feature_attack.epochs);
      read(f, "lr", c.feature_attack.lr);
      read(f, "band", c.feature_attack.band);
      read(f, "full_flip_guidance", c.feature_attack.full_flip_guidance);
      read(f, "k_prime", c.k_prime);
    }
    read(j, "trials", c.trials);
    read(j, "seed", c.seed);
    read(j, "output", c.output);
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError("config '" + path + "' is not valid JSON: " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  // Relative data paths resolve against the config's directory.
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&c.data.features, &c.data.edges, &c.data.labels})
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  return c;
}

/// 64-bit FNV-1a over the canonical JSON form, as 16 hex digits. The output
/// path does not affect any row and is left out.
inline std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

struct ReportRow {
  int trial = 0;
  Index budget_index = 0;
  double budget_prop = 0.0;
  Index budget = 0;
  std::string method;
  std::uint64_t seed = 0;
  std::optional<double> clean_auc;
  double er5_clean = 0.0;
  double er10_clean = 0.0;
  double mean_before = 0.0;
  // Unset when the cell failed; `error` then names the failure.
  std::optional<double> er5;
  std::optional<double> er10;
  std::optional<double> mean_after;
  Index modified_edges = 0;
  Index attack_nodes = 0;
  Index shortfall = 0;
  std::vector<Index> targets;
  std::vector<std::string> warnings;
  std::string error;
  double seconds = 0.0;  // wall clock; kept out of the main report

  bool ok() const { return error.empty(); }
};

struct AttackReport {
  ExperimentConfig config;
  std::string hash;
  std::vector<ReportRow> rows;
};

namespace detail {

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const DimensionMismatch*>(&e)) return "DimensionMismatch";
  if (dynamic_cast<const InvalidGraph*>(&e)) return "InvalidGraph";
  if (dynamic_cast<const SingleClass*>(&e)) return "SingleClass";
  if (dynamic_cast<const DataError*>(&e)) return "DataError";
  if (dynamic_cast<const SingularSystem*>(&e)) return "SingularSystem";
  if (dynamic_cast<const DegenerateVector*>(&e)) return "DegenerateVector";
  if (dynamic_cast<const NumericError*>(&e)) return "NumericError";
  if (dynamic_cast<const EmptyGuidance*>(&e)) return "EmptyGuidance";
  if (dynamic_cast<const BudgetExceedsSupport*>(&e)) return "BudgetExceedsSupport";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
  return "Error";
}

inline Index method_index(const ExperimentConfig& cfg, const std::string& m) {
  const auto& list = cfg.method_list();
  const auto it = std::find(list.begin(), list.end(), m);
  if (it == list.end()) throw InvalidArgument("method '" + m + "' is not in the config");
  return static_cast<Index>(it - list.begin());
}

}  // namespace detail

/// Data, clean scores and targets of one trial, plus the relaxed attacks
/// shared by every budget of that trial.
class TrialContext {
 public:
  TrialContext(const ExperimentConfig& cfg, int trial) : cfg_(cfg), trial_(trial) {
    seed_ = derive_seed(cfg.seed, {static_cast<std::uint64_t>(trial)});
    load_data();
    pick_targets();
  }

  int trial() const noexcept { return trial_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<Index>& targets() const noexcept { return targets_; }
  const AnomalyScores& clean_scores() const noexcept { return clean_; }
  const std::vector<bool>& labels() const noexcept { return labels_; }
  const DenseGraph& graph() const noexcept { return graph_; }
  const BipartiteGraph& bipartite() const noexcept { return bipartite_; }
  const FeatureMatrix& features() const noexcept { return features_; }

  std::uint64_t row_seed(Index budget_index, Index method_index) const {
    return derive_seed(seed_, {4, static_cast<std::uint64_t>(budget_index), static_cast<std::uint64_t>(method_index)});
  }

  ReportRow evaluate(Index budget_index, const std::string& method) {
    ReportRow row;
    row.trial = trial_;
    row.budget_index = budget_index;
    row.budget_prop = cfg_.budgets.at(static_cast<std::size_t>(budget_index));
    row.method = method;
    row.seed = row_seed(budget_index, detail::method_index(cfg_, method));
    row.targets = targets_;
    row.clean_auc = clean_auc_;
    row.er5_clean = evasion_rate(clean_, targets_, 0.05);
    row.er10_clean = evasion_rate(clean_, targets_, 0.10);
    row.mean_before = mean_of(clean_, targets_);
    const auto start = std::chrono::steady_clock::now();
    try {
      row.budget = cfg_.model == ModelKind::prox ? budget_from_proportion(graph_, targets_, row.budget_prop)
                                                 : budget_from_proportion(bipartite_, targets_, row.budget_prop);
      if (cfg_.space == AttackSpace::graph)
        graph_cell(row);
      else
        feature_cell(row);
    } catch (const std::exception& e) {
      row.error = detail::error_kind(e) + ": " + e.what();
      row.er5.reset();
      row.er10.reset();
      row.mean_after.reset();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
  }

 private:
  void load_data() {
    const std::uint64_t data_seed = derive_seed(seed_, {1});
    if (cfg_.model == ModelKind::prox) {
      if (cfg_.data.synthetic) {
        SyntheticFeatures s = clustered_features(cfg_.data.feature_spec, data_seed);
        features_ = std::move(s.features);
        labels_ = std::move(s.labels);
      } else {
        LoadedFeatures f = load_feature_csv(cfg_.data.features);
        features_ = std::move(f.features);
        labels_ = std::move(f.labels);
        if (!cfg_.data.labels.empty()) labels_ = load_node_labels(cfg_.data.labels, features_.rows());
      }
      graph_ = build_proximity_graph(features_, cfg_.proximity);
      clean_ = prox_anomaly_scores(graph_, cfg_.alpha);
    } else {
      if (cfg_.data.synthetic) {
        const BipartiteGraph base = bipartite_block_model(cfg_.data.bipartite_spec, data_seed);
        InjectedBipartite inj = inject_bipartite_anomalies(base, cfg_.data.injection, derive_seed(seed_, {2}));
        bipartite_ = std::move(inj.graph);
        labels_ = std::move(inj.labels);
      } else {
        bipartite_ = load_bipartite_edges(cfg_.data.edges).graph;
        if (!cfg_.data.labels.empty()) labels_ = load_node_labels(cfg_.data.labels, bipartite_.v_size());
      }
      clean_ = bigraph_anomaly_scores(bipartite_, cfg_.alpha);
    }
    const bool both = std::find(labels_.begin(), labels_.end(), true) != labels_.end() &&
                      std::find(labels_.begin(), labels_.end(), false) != labels_.end();
    if (both) clean_auc_ = auc(clean_.values, labels_);
  }

  void pick_targets() {
    const std::uint64_t s = derive_seed(seed_, {3});
    const Index n = clean_.size();
    if (cfg_.target_rule == TargetRule::labels) {
      std::vector<Index> anomalies;
      for (Index v = 0; v < static_cast<Index>(labels_.size()); ++v)
        if (labels_[static_cast<std::size_t>(v)]) anomalies.push_back(v);
      if (anomalies.empty()) throw DataError("target rule 'labels' needs labelled anomalies");
      const Index count = cfg_.target_count > 0 ? cfg_.target_count : static_cast<Index>(anomalies.size());
      if (count < static_cast<Index>(anomalies.size())) {
        std::mt19937_64 rng(s);
        std::shuffle(anomalies.begin(), anomalies.end(), rng);
        anomalies.resize(static_cast<std::size_t>(count));
        std::sort(anomalies.begin(), anomalies.end());
      }
      targets_ = std::move(anomalies);
      return;
    }
    const Index pool = std::min(cfg_.target_pool, n);
    const Index count = std::min(cfg_.target_count > 0 ? cfg_.target_count : cfg_.default_count(), pool);
    targets_ = sample_targets(clean_, pool, count, s);
  }

  GraphAttackProblem problem() const {
    return cfg_.model == ModelKind::prox ? GraphAttackProblem::prox(graph_, targets_, cfg_.alpha)
                                         : GraphAttackProblem::bigraph(bipartite_, targets_, cfg_.alpha);
  }

  const RelaxedAttack& relaxed(Variant v) {
    auto it = relaxed_.find(v);
    if (it == relaxed_.end()) {
      GraphAttackConfig g = cfg_.graph_attack;
      g.alpha = cfg_.alpha;
      g.variant = v;
      it = relaxed_.emplace(v, optimize_perturbation(problem(), g)).first;
    }
    return it->second;
  }

  AnomalyScores rescore(const GraphAttackOutcome& out) const {
    return cfg_.model == ModelKind::prox ? prox_anomaly_scores(out.attacked, cfg_.alpha)
                                         : bigraph_anomaly_scores(attacked_bipartite(out, bipartite_.u_size()),
                                                                  cfg_.alpha);
  }

  void record(ReportRow& row, const AnomalyScores& after) const {
    row.er5 = evasion_rate(after, targets_, 0.05);
    row.er10 = evasion_rate(after, targets_, 0.10);
    row.mean_after = mean_of(after, targets_);
  }

  void graph_cell(ReportRow& row) {
    const GraphAttackProblem p = problem();
    GraphAttackOutcome out;
    if (row.method == "alterI" || row.method == "cf") {
      const Variant v = parse_variant(row.method);
      if (row.budget > p.empty_perturbation().support_size())
        throw BudgetExceedsSupport("budget exceeds support size");
      out = finalize_attack(p, relaxed(v), row.budget);
    } else if (row.method == "rnd-add") {
      out = baseline_rnd_add(p, row.budget, row.seed);
    } else {
      out = baseline_deg_add(p, row.budget);
    }
    row.modified_edges = static_cast<Index>(out.modified_edges.size());
    row.attack_nodes = static_cast<Index>(out.attack_nodes.size());
    row.shortfall = out.shortfall;
    if (out.shortfall > 0)
      row.warnings.push_back("only " + std::to_string(row.modified_edges) + " candidate pairs for budget " +
                             std::to_string(row.budget));
    record(row, rescore(out));
  }

  void feature_cell(ReportRow& row) {
    if (row.budget == 0) {
      record(row, clean_);
      return;
    }
    const GraphAttackProblem p = problem();
    const GraphAttackOutcome guide = finalize_attack(p, relaxed(Variant::alter_i), row.budget);
    const Index k_prime = cfg_.k_prime > 0 ? cfg_.k_prime : guided_node_count(guide, targets_);
    if (k_prime == 0) throw EmptyGuidance("graph-space guidance touches no non-target node");
    FeatureAttackConfig fc = cfg_.feature_attack;
    fc.k_prime = k_prime;
    fc.proximity = cfg_.proximity;
    fc.alpha = cfg_.alpha;
    fc.seed = row.seed;
    const FeatureAttackOutcome out =
        run_feature_method(parse_feature_method(row.method), features_, targets_, &guide, fc);
    Index changed = 0;
    const Matrix& a = out.graph.weights();
    const Matrix& c = graph_.weights();
    for (Index u = 0; u < a.rows(); ++u)
      for (Index v = u + 1; v < a.cols(); ++v)
        if (a(u, v) != c(u, v)) ++changed;
    row.modified_edges = changed;
    row.attack_nodes = static_cast<Index>(out.nodes.size());
    row.warnings = out.warnings;
    record(row, prox_anomaly_scores(out.graph, cfg_.alpha));
  }

  const ExperimentConfig& cfg_;
  int trial_;
  std::uint64_t seed_ = 0;
  FeatureMatrix features_;
  DenseGraph graph_;
  BipartiteGraph bipartite_;
  std::vector<bool> labels_;
  AnomalyScores clean_;
  std::optional<double> clean_auc_;
  std::vector<Index> targets_;
  std::map<Variant, RelaxedAttack> relaxed_;
};

/// Rows in (trial, budget, method) order. A failing cell is recorded with
/// its error and the sweep continues.
inline AttackReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  AttackReport report{cfg, config_hash(cfg), {}};
  for (int t = 0; t < cfg.trials; ++t) {
    TrialContext ctx(cfg, t);
    for (Index b = 0; b < static_cast<Index>(cfg.budgets.size()); ++b)
      for (const auto& m : cfg.method_list()) report.rows.push_back(ctx.evaluate(b, m));
  }
  return report;
}

/// Recomputes one row from scratch.
inline ReportRow run_row(const ExperimentConfig& cfg, int trial, Index budget_index, const std::string& method) {
  cfg.validate();
  if (trial < 0 || trial >= cfg.trials) throw InvalidArgument("trial index out of range");
  if (budget_index < 0 || budget_index >= static_cast<Index>(cfg.budgets.size()))
    throw InvalidArgument("budget index out of range");
  TrialContext ctx(cfg, trial);
  return ctx.evaluate(budget_index, method);
}

inline Json to_json(const ReportRow& r, const std::string& hash) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j{{"type", "row"},
         {"config_hash", hash},
         {"trial", r.trial},
         {"budget_index", r.budget_index},
         {"budget_prop", r.budget_prop},
         {"budget", r.budget},
         {"method", r.method},
         {"seed", r.seed},
         {"targets", r.targets},
         {"clean_auc", opt(r.clean_auc)},
         {"er5_clean", r.er5_clean},
         {"er10_clean", r.er10_clean},
         {"er5", opt(r.er5)},
         {"er10", opt(r.er10)},
         {"mean_before", r.mean_before},
         {"mean_after", opt(r.mean_after)},
         {"modified_edges", r.modified_edges},
         {"attack_nodes", r.attack_nodes},
         {"shortfall", r.shortfall},
         {"warnings", r.warnings}};
  if (!r.ok()) j["error"] = r.error;
  return j;
}

inline std::string row_line(const ReportRow& r, const std::string& hash) { return to_json(r, hash).dump(); }

/// Config header line, then one line per row.
inline void write_report_jsonl(std::ostream& out, const AttackReport& rep) {
  out << Json{{"type", "config"}, {"config_hash", rep.hash}, {"config", to_json(rep.config)}}.dump() << '\n';
  for (const auto& r : rep.rows) out << row_line(r, rep.hash) << '\n';
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace detail

inline void write_report_csv(std::ostream& out, const AttackReport& rep) {
  out << "config_hash,trial,budget_index,budget_prop,budget,method,seed,clean_auc,er5_clean,er10_clean,er5,er10,"
         "mean_before,mean_after,modified_edges,attack_nodes,shortfall,error\n";
  out << std::setprecision(17);
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : rep.rows) {
    out << rep.hash << ',' << r.trial << ',' << r.budget_index << ',' << r.budget_prop << ',' << r.budget << ','
        << r.method << ',' << r.seed << ',';
    opt(r.clean_auc);
    out << ',' << r.er5_clean << ',' << r.er10_clean << ',';
    opt(r.er5);
    out << ',';
    opt(r.er10);
    out << ',' << r.mean_before << ',';
    opt(r.mean_after);
    out << ',' << r.modified_edges << ',' << r.attack_nodes << ',' << r.shortfall << ','
        << detail::csv_quote(r.error) << '\n';
  }
}

inline void write_timing_jsonl(std::ostream& out, const AttackReport& rep) {
  for (const auto& r : rep.rows)
    out << Json{{"config_hash", rep.hash}, {"trial", r.trial}, {"budget_index", r.budget_index},
                {"method", r.method}, {"seconds", r.seconds}}
               .dump()
        << '\n';
}

struct ReportPaths {
  std::string jsonl, csv, timing;
};

inline ReportPaths report_paths(const std::string& output) {
  std::filesystem::path p(output);
  std::filesystem::path csv = p, timing = p;
  csv.replace_extension(".csv");
  timing.replace_extension(".timing.jsonl");
  return {p.string(), csv.string(), timing.string()};
}

/// Writes the JSON-lines report, its CSV mirror and the timing sidecar.
inline ReportPaths write_report(const AttackReport& rep, const std::string& output) {
  const ReportPaths paths = report_paths(output);
  const auto parent = std::filesystem::path(output).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  auto open = [](const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write '" + path + "'");
    return f;
  };
  std::ofstream j = open(paths.jsonl);
  write_report_jsonl(j, rep);
  std::ofstream c = open(paths.csv);
  write_report_csv(c, rep);
  std::ofstream t = open(paths.timing);
  write_timing_jsonl(t, rep);
  return paths;
}

}  // namespace rwad
