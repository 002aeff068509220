#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "frote/conflicts.hpp"
#include "frote/dataset.hpp"
#include "frote/domain.hpp"
#include "frote/engine.hpp"
#include "frote/error.hpp"
#include "frote/metric.hpp"
#include "frote/models.hpp"
#include "frote/modification.hpp"
#include "frote/objective.hpp"
#include "frote/rng.hpp"
#include "frote/rule_parser.hpp"
#include "frote/rules.hpp"

namespace frote {

// ---------------------------------------------------------------------------
// Seed rules and perturbation

/// Collapses a root-to-leaf path: one tightest lower and upper bound per numeric
/// attribute; for categorical attributes an equality absorbs the inequalities.
inline Clause simplify_path(const std::vector<Predicate>& path, const Schema& schema) {
  Clause out;
  std::vector<std::size_t> attrs;
  for (const auto& p : path)
    if (std::find(attrs.begin(), attrs.end(), p.attribute) == attrs.end()) attrs.push_back(p.attribute);
  for (auto a : attrs) {
    std::vector<Predicate> on;
    for (const auto& p : path)
      if (p.attribute == a) on.push_back(p);
    if (schema.attribute(a).is_numeric()) {
      std::optional<Predicate> lower, upper;
      for (const auto& p : on) {
        if (p.op == Op::gt || p.op == Op::ge) {
          if (!lower || p.value > lower->value || (p.value == lower->value && p.op == Op::gt)) lower = p;
        } else if (p.op == Op::lt || p.op == Op::le) {
          if (!upper || p.value < upper->value || (p.value == upper->value && p.op == Op::lt)) upper = p;
        } else {
          out.predicates.push_back(p);
        }
      }
      if (lower) out.predicates.push_back(*lower);
      if (upper) out.predicates.push_back(*upper);
    } else {
      auto eq = std::find_if(on.begin(), on.end(), [](const Predicate& p) { return p.op == Op::eq; });
      if (eq != on.end()) {
        out.predicates.push_back(*eq);
        continue;
      }
      std::set<double> seen;
      for (const auto& p : on)
        if (seen.insert(p.value).second) out.predicates.push_back(p);
    }
  }
  return out;
}

/// Deterministic rules read off a decision tree fitted to `d`: one per leaf,
/// predicting the leaf's majority class.
inline std::vector<FeedbackRule> extract_seed_rules(const Dataset& d, std::size_t max_depth, std::uint64_t seed = 0) {
  TreeParams p;
  p.max_depth = max_depth;
  const auto tree = DecisionTree::fit(d, p, seed);
  const auto paths = tree->paths();
  if (paths.size() < 2) throw ValidationError("decision tree has a single leaf; no seed rules can be extracted");
  std::vector<FeedbackRule> out;
  for (std::size_t i = 0; i < paths.size(); ++i)
    out.emplace_back("seed" + std::to_string(i + 1), simplify_path(paths[i].predicates, d.schema()),
                     LabelDistribution::delta(paths[i].majority, d.schema().num_labels()));
  return out;
}

inline Op reverse_op(Op op) {
  switch (op) {
    case Op::eq: return Op::ne;
    case Op::ne: return Op::eq;
    case Op::lt: return Op::gt;
    case Op::gt: return Op::lt;
    case Op::le: return Op::ge;
    case Op::ge: return Op::le;
  }
  return op;
}

struct CoverageBounds {
  double lo = 0.05;
  double hi = 0.25;

  void validate() const {
    if (!(lo >= 0 && lo < hi && hi <= 1)) throw ValidationError("coverage bounds must satisfy 0 <= lo < hi <= 1");
  }
  bool admits(double fraction) const { return fraction >= lo && fraction < hi; }
};

struct RulePool {
  std::vector<FeedbackRule> rules;
  std::size_t attempts = 0;
  bool complete = false;  // false when the attempt cap ended the search early
};

inline constexpr std::size_t kPoolAttemptFactor = 100;

namespace detail {

/// One random perturbation of `rule`; nullopt when the chosen move does not apply.
inline std::optional<Clause> perturb_once(const FeedbackRule& rule, const std::vector<FeedbackRule>& seeds,
                                          const Dataset& d, const DistanceMetric& range, Rng& rng) {
  const auto& schema = d.schema();
  Clause c = rule.clause();
  const auto move = uniform_index(rng, 3);
  if (move < 2 && c.empty()) return std::nullopt;
  if (move == 0) {
    auto& p = c.predicates[uniform_index(rng, c.size())];
    if (schema.attribute(p.attribute).is_numeric() && p.op == Op::eq) return std::nullopt;
    p.op = reverse_op(p.op);
    return c;
  }
  if (move == 1) {
    auto& p = c.predicates[uniform_index(rng, c.size())];
    if (schema.attribute(p.attribute).is_numeric()) {
      p.value = range.min(p.attribute) + uniform01(rng) * range.range(p.attribute);
      return c;
    }
    std::vector<double> observed;
    for (const auto& r : d.rows())
      if (r.values[p.attribute] != p.value) observed.push_back(r.values[p.attribute]);
    std::sort(observed.begin(), observed.end());
    observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
    if (observed.empty()) return std::nullopt;
    p.value = observed[uniform_index(rng, observed.size())];
    return c;
  }
  if (seeds.size() < 2) return std::nullopt;
  const auto& other = seeds[uniform_index(rng, seeds.size())];
  if (&other == &rule || other.clause().empty()) return std::nullopt;
  const auto& extra = other.clause().predicates[uniform_index(rng, other.clause().size())];
  for (const auto& p : c.predicates)
    if (p.attribute == extra.attribute && (p.op == Op::eq || p == extra)) return std::nullopt;
  c.predicates.push_back(extra);
  return c;
}

}  // namespace detail

/// Builds a pool of perturbed rules. Each candidate applies one perturbation to
/// a random seed rule and is kept when satisfiable, new, and its coverage
/// fraction of `d` lies in [lo, hi). At most 100 x `count` candidates are tried.
inline RulePool perturb_rules(const std::vector<FeedbackRule>& seeds, const Dataset& d, std::size_t count,
                              CoverageBounds bounds, Rng& rng) {
  if (seeds.empty()) throw ValidationError("no seed rules to perturb");
  bounds.validate();
  const auto range = DistanceMetric::fit(d);
  RulePool pool;
  std::set<std::string> seen;
  const std::size_t cap = kPoolAttemptFactor * std::max<std::size_t>(count, 1);
  while (pool.rules.size() < count && pool.attempts < cap) {
    ++pool.attempts;
    const auto& rule = seeds[uniform_index(rng, seeds.size())];
    auto clause = detail::perturb_once(rule, seeds, d, range, rng);
    if (!clause || !satisfiable(*clause, d.schema())) continue;
    const double frac = static_cast<double>(coverage(*clause, d).size()) / static_cast<double>(d.size());
    if (!bounds.admits(frac)) continue;
    FeedbackRule cand("p" + std::to_string(pool.rules.size() + 1), std::move(*clause), rule.distribution);
    const auto key = render_clause(cand.clause(), d.schema()) + " -> " + render_distribution(cand.distribution, d.schema());
    if (!seen.insert(key).second) continue;
    pool.rules.push_back(std::move(cand));
  }
  pool.complete = pool.rules.size() >= count;
  return pool;
}

inline constexpr std::size_t kDrawAttempts = 1000;

/// Draws `size` distinct pool rules with no pairwise conflict (redrawing up to
/// 1000 times) and merges same-label overlaps so coverages are disjoint.
inline FeedbackRuleSet draw_rule_set(const std::vector<FeedbackRule>& pool, std::size_t size, SchemaPtr schema,
                                     Rng& rng) {
  if (size == 0) throw ValidationError("rule set size must be at least 1");
  if (pool.size() < size)
    throw ValidationError("pool holds " + std::to_string(pool.size()) + " rules, fewer than the requested " +
                          std::to_string(size));
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t attempt = 0; attempt < kDrawAttempts; ++attempt) {
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
    std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(chosen.begin(), chosen.end());
    std::vector<FeedbackRule> rules;
    for (auto i : chosen) rules.push_back(pool[i]);
    FeedbackRuleSet frs(schema, std::move(rules));
    if (detect_conflicts(frs).empty()) return merge_overlapping(frs);
  }
  throw ValidationError("cannot assemble a conflict-free rule set of size " + std::to_string(size) +
                        " from a pool of " + std::to_string(pool.size()) + " rules");
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  std::string data;
  std::string schema;
  std::string rules;  // optional fixed rule set; when empty rules are drawn from a perturbed pool
  TrainerSpec trainer;
  std::size_t frs_size = 1;
  double tcf = 0.0;
  std::size_t runs = 1;
  std::uint64_t seed = 0;
  CoverageBounds coverage;
  std::size_t pool_size = 50;
  std::size_t seed_depth = 3;
  double outside_train_fraction = 0.7;
  FroteConfig frote;

  void validate() const {
    if (runs < 1) throw ValidationError("runs must be at least 1");
    if (frs_size < 1) throw ValidationError("frs_size must be at least 1");
    if (!(tcf >= 0 && tcf <= 1)) throw ValidationError("tcf must lie in [0, 1]");
    if (!(outside_train_fraction > 0 && outside_train_fraction < 1))
      throw ValidationError("outside_train_fraction must lie in (0, 1)");
    if (seed_depth < 1) throw ValidationError("pool.seed_depth must be at least 1");
    coverage.validate();
    frote.validate();
  }

  /// Parses the experiment file format; relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
    static const std::set<std::string> known{"data",  "schema", "rules",  "model",    "frs_size",
                                             "tcf",   "runs",   "seed",   "coverage", "pool",
                                             "frote", "outside_train_fraction"};
    for (const auto& [key, _] : j.items())
      if (!known.count(key)) throw ValidationError("experiment config: unknown key '" + key + "'");
    ExperimentConfig c;
    try {
      auto path = [&](const std::string& key) {
        std::filesystem::path p = j.at(key).get<std::string>();
        return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
      };
      c.data = path("data");
      c.schema = path("schema");
      if (j.contains("rules")) c.rules = path("rules");
      if (j.contains("model")) {
        const auto& m = j.at("model");
        c.trainer = TrainerSpec::parse(m.at("kind").get<std::string>(),
                                       m.value("hyperparameters", nlohmann::json::object()));
      }
      c.frs_size = j.value("frs_size", c.frs_size);
      c.tcf = j.value("tcf", c.tcf);
      c.runs = j.value("runs", c.runs);
      c.seed = j.value("seed", c.seed);
      c.outside_train_fraction = j.value("outside_train_fraction", c.outside_train_fraction);
      if (j.contains("coverage")) {
        c.coverage.lo = j.at("coverage").value("lo", c.coverage.lo);
        c.coverage.hi = j.at("coverage").value("hi", c.coverage.hi);
      }
      if (j.contains("pool")) {
        c.pool_size = j.at("pool").value("size", c.pool_size);
        c.seed_depth = j.at("pool").value("seed_depth", c.seed_depth);
      }
      if (j.contains("frote")) {
        const auto& f = j.at("frote");
        static const std::set<std::string> fk{"tau", "q", "k", "eta", "selector", "strategy", "weight_neighbors"};
        for (const auto& [key, _] : f.items())
          if (!fk.count(key)) throw ValidationError("experiment config: unknown frote key '" + key + "'");
        c.frote.tau = f.value("tau", c.frote.tau);
        c.frote.q = f.value("q", c.frote.q);
        c.frote.k = f.value("k", c.frote.k);
        if (f.contains("eta") && !f.at("eta").is_null()) c.frote.eta_override = f.at("eta").get<std::size_t>();
        if (f.contains("selector")) c.frote.selector = parse_selector(f.at("selector").get<std::string>());
        if (f.contains("strategy")) c.frote.strategy = parse_strategy(f.at("strategy").get<std::string>());
        c.frote.weight_neighbors = f.value("weight_neighbors", c.frote.weight_neighbors);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json f = frote.to_json();
    f.erase("seed");
    nlohmann::json j{{"data", data},
                     {"schema", schema},
                     {"model", trainer.to_json()},
                     {"frs_size", frs_size},
                     {"tcf", tcf},
                     {"runs", runs},
                     {"seed", seed},
                     {"coverage", {{"lo", coverage.lo}, {"hi", coverage.hi}}},
                     {"pool", {{"size", pool_size}, {"seed_depth", seed_depth}}},
                     {"outside_train_fraction", outside_train_fraction},
                     {"frote", f}};
    if (!rules.empty()) j["rules"] = rules;
    return j;
  }
};

struct ModelScores {
  std::optional<double> mra;
  std::optional<double> f1;
  double j_bar = 0;

  static ModelScores of(const ObjectiveReport& r) { return {r.agreement.aggregate, r.outside.f1, r.value}; }

  nlohmann::json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"mra", opt(mra)}, {"f1", opt(f1)}, {"j_bar", j_bar}};
  }
};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> rules;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  ModelScores initial, modified, final;
  std::size_t instances_added = 0;
  double instances_added_fraction = 0;
  std::size_t iterations = 0;
  std::size_t accepted_iterations = 0;
  nlohmann::json trace = nlohmann::json::array();

  nlohmann::json to_json() const {
    return {{"run", run},
            {"seed", seed},
            {"rules", rules},
            {"train_rows", train_rows},
            {"test_rows", test_rows},
            {"metrics", {{"initial", initial.to_json()}, {"mod", modified.to_json()}, {"final", final.to_json()}}},
            {"delta_j_bar",
             {{"final_minus_initial", final.j_bar - initial.j_bar}, {"final_minus_mod", final.j_bar - modified.j_bar}}},
            {"instances_added", instances_added},
            {"instances_added_fraction", instances_added_fraction},
            {"iterations", iterations},
            {"accepted_iterations", accepted_iterations},
            {"trace", trace}};
  }
};

/// Mean and sample standard deviation; a single value has deviation 0.
struct Summary {
  double mean = 0;
  double std = 0;
  std::size_t count = 0;

  static Summary of(const std::vector<double>& v) {
    Summary s;
    s.count = v.size();
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
  }

  nlohmann::json to_json() const { return {{"mean", mean}, {"std", std}, {"count", count}}; }
};

struct RunReport {
  ExperimentConfig config;
  std::size_t pool_size = 0;
  std::size_t pool_attempts = 0;
  std::vector<RunResult> runs;

  /// Per-metric summaries recomputed from the run rows; undefined values are skipped.
  nlohmann::json aggregate() const {
    nlohmann::json out = nlohmann::json::object();
    auto add = [&](const std::string& name, auto get) {
      std::vector<double> v;
      for (const auto& r : runs)
        if (auto x = get(r)) v.push_back(*x);
      out[name] = Summary::of(v).to_json();
    };
    const std::pair<const char*, ModelScores RunResult::*> stages[] = {
        {"initial", &RunResult::initial}, {"mod", &RunResult::modified}, {"final", &RunResult::final}};
    for (const auto& [stage, member] : stages) {
      add(std::string(stage) + ".mra", [member](const RunResult& r) { return (r.*member).mra; });
      add(std::string(stage) + ".f1", [member](const RunResult& r) { return (r.*member).f1; });
      add(std::string(stage) + ".j_bar",
          [member](const RunResult& r) { return std::optional<double>((r.*member).j_bar); });
    }
    add("delta_j_bar.final_minus_initial",
        [](const RunResult& r) { return std::optional<double>(r.final.j_bar - r.initial.j_bar); });
    add("delta_j_bar.final_minus_mod",
        [](const RunResult& r) { return std::optional<double>(r.final.j_bar - r.modified.j_bar); });
    add("instances_added", [](const RunResult& r) { return std::optional<double>(r.instances_added); });
    add("instances_added_fraction", [](const RunResult& r) { return std::optional<double>(r.instances_added_fraction); });
    add("iterations", [](const RunResult& r) { return std::optional<double>(r.iterations); });
    add("accepted_iterations", [](const RunResult& r) { return std::optional<double>(r.accepted_iterations); });
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : runs) rs.push_back(r.to_json());
    return {{"config", config.to_json()},
            {"pool", {{"size", pool_size}, {"attempts", pool_attempts}}},
            {"runs", rs},
            {"aggregate", aggregate()}};
  }
};

struct ExperimentHooks {
  std::function<void(std::size_t run, const FeedbackRuleSet&, const AugmentationResult&)> on_run;
};

/// Rejects rule sets with conflicts and merges same-label overlaps.
inline FeedbackRuleSet prepare_rule_set(const FeedbackRuleSet& frs) {
  const auto conflicts = detect_conflicts(frs);
  if (!conflicts.empty())
    throw ValidationError("rules '" + conflicts.front().first + "' and '" + conflicts.front().second +
                          "' conflict; resolve them first (rules resolve)");
  return merge_overlapping(frs);
}

/// The multi-run protocol on an in-memory dataset. With `fixed` set every run
/// uses that rule set; otherwise each run draws from a pool perturbed from
/// decision-tree seed rules.
inline RunReport run_experiment(const ExperimentConfig& cfg, const Dataset& data,
                                const std::optional<FeedbackRuleSet>& fixed = std::nullopt,
                                const ExperimentHooks& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw ValidationError("dataset is empty");
  RunReport report;
  report.config = cfg;

  std::vector<FeedbackRule> pool;
  if (!fixed) {
    Rng pool_rng = make_rng(cfg.seed, "pool");
    const auto seeds = extract_seed_rules(data, cfg.seed_depth, derive_seed(cfg.seed, "seed-tree"));
    auto built = perturb_rules(seeds, data, cfg.pool_size, cfg.coverage, pool_rng);
    report.pool_attempts = built.attempts;
    pool = std::move(built.rules);
    report.pool_size = pool.size();
  }
  const auto fixed_set = fixed ? std::optional<FeedbackRuleSet>(prepare_rule_set(*fixed)) : std::nullopt;

  for (std::size_t run = 0; run < cfg.runs; ++run) {
    const auto run_seed = derive_seed(cfg.seed, "run", run);
    Rng draw_rng = make_rng(run_seed, "draw");
    const FeedbackRuleSet frs = fixed_set ? *fixed_set : draw_rule_set(pool, cfg.frs_size, data.schema_ptr(), draw_rng);

    Rng split_rng = make_rng(run_seed, "split");
    auto split = split_with_tcf(data, frs, cfg.tcf, cfg.outside_train_fraction, split_rng);
    if (split.test.empty()) throw ValidationError("test split is empty");

    FroteConfig fc = cfg.frote;
    fc.seed = derive_seed(run_seed, "frote");
    const auto res = run_frote(fc, split.train, frs, cfg.trainer);
    if (hooks.on_run) hooks.on_run(run, frs, res);

    RunResult rr;
    rr.run = run;
    rr.seed = run_seed;
    for (const auto& r : frs) rr.rules.push_back(describe_rule(r, data.schema()));
    rr.train_rows = split.train.size();
    rr.test_rows = split.test.size();
    rr.initial = ModelScores::of(j_bar_report(res.initial_model, frs, split.test));
    rr.modified = ModelScores::of(j_bar_report(res.modified_model, frs, split.test));
    rr.final = ModelScores::of(j_bar_report(res.model, frs, split.test));
    rr.instances_added = res.instances_added;
    rr.instances_added_fraction = static_cast<double>(res.instances_added) / static_cast<double>(split.train.size());
    rr.iterations = res.trace.size();
    rr.accepted_iterations = res.accepted_iterations();
    for (const auto& t : res.trace) rr.trace.push_back(t.to_json());
    report.runs.push_back(std::move(rr));
  }
  return report;
}

/// Loads the files named in `cfg` and runs the protocol.
inline RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentHooks& hooks = {}) {
  auto schema = load_schema(cfg.schema);
  const auto data = load_dataset(cfg.data, schema);
  std::optional<FeedbackRuleSet> fixed;
  if (!cfg.rules.empty()) fixed = load_rule_set(cfg.rules, schema);
  return run_experiment(cfg, data, fixed, hooks);
}

}  // namespace frote
