// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "frote/frote.hpp"

#ifndef FROTE_CLI_PATH
#error "FROTE_CLI_PATH must name the CLI binary"
#endif

namespace fs = std::filesystem;
using namespace frote;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

// Observations gathered from every engine run of criteria 1-3.
struct RunAudit {
  std::size_t synthetic = 0;
  std::size_t synthetic_violations = 0;
  std::size_t runs = 0;
  std::size_t monotonic_violations = 0;
  std::size_t quota_violations = 0;
  std::size_t eta_mismatches = 0;

  ExperimentHooks hooks(const FroteConfig& fc) {
    ExperimentHooks h;
    h.on_run = [this, fc](std::size_t, const FeedbackRuleSet& frs, const AugmentationResult& res) {
      ++runs;
      const auto& d = res.dataset;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& p = d.provenance(i);
        if (!p.is_synthetic()) continue;
        ++synthetic;
        const auto* rule = frs.find(p.rule_id);
        if (!rule || !rule->satisfied_by(d[i].values)) ++synthetic_violations;
      }
      std::optional<double> last;
      for (const auto& t : res.trace) {
        if (static_cast<double>(t.n_before) > fc.q * static_cast<double>(res.input_rows)) ++quota_violations;
        if (!t.accepted) continue;
        if (!(t.j_after < t.j_before) || (last && !(t.j_after < *last))) ++monotonic_violations;
        last = t.j_after;
      }
      // ceil(q |D| / tau) for q = 1/2 in integer arithmetic.
      const std::size_t expected = (res.input_rows + 2 * fc.tau - 1) / (2 * fc.tau);
      if (res.eta != std::max<std::size_t>(expected, 1)) ++eta_mismatches;
    };
    return h;
  }
};

ExperimentConfig blobs_config(double tcf, Selector selector) {
  ExperimentConfig cfg;
  cfg.trainer = TrainerSpec::parse("logreg");
  cfg.tcf = tcf;
  cfg.runs = 10;
  cfg.seed = 1;
  cfg.frote.tau = 50;
  cfg.frote.q = 0.5;
  cfg.frote.k = 5;
  cfg.frote.selector = selector;
  cfg.frote.strategy = ModificationStrategy::relabel;
  return cfg;
}

// ---------------------------------------------------------------------------
// Criterion 4: brute force over every subset of the union of base populations.

double brute_force_ip(const std::vector<BasePopulation>& bps, const InstanceWeights& w, std::size_t eta,
                      std::size_t k, bool& feasible) {
  std::vector<std::size_t> rows, owner;
  std::size_t live = 0;
  for (std::size_t b = 0; b < bps.size(); ++b) {
    live += bps[b].empty() ? 0 : 1;
    for (auto r : bps[b].members) {
      rows.push_back(r);
      owner.push_back(b);
    }
  }
  std::vector<std::size_t> lower(bps.size()), upper(bps.size());
  for (std::size_t b = 0; b < bps.size(); ++b) {
    lower[b] = std::min(k + 1, bps[b].size());
    upper[b] = std::max(eta / live, lower[b]);
  }
  double best = -1;
  for (std::uint64_t mask = 0; mask < (1ULL << rows.size()); ++mask) {
    std::vector<std::size_t> count(bps.size(), 0);
    double value = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if ((mask >> i) & 1ULL) {
        ++count[owner[i]];
        value += w.weight[rows[i]];
      }
    bool ok = true;
    for (std::size_t b = 0; b < bps.size() && ok; ++b)
      ok = bps[b].empty() || (count[b] >= lower[b] && count[b] <= upper[b]);
    if (ok) best = std::max(best, value);
  }
  feasible = best >= 0;
  return best;
}

void criterion_ip_oracle() {
  Rng rng(20240601);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rules = 1 + uniform_index(rng, 3);
    const std::size_t total = 1 + uniform_index(rng, 20);
    std::vector<BasePopulation> bps(rules);
    std::vector<std::size_t> rows(40);
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 0; i < total; ++i) bps[uniform_index(rng, rules)].members.push_back(rows[i]);
    for (std::size_t b = 0; b < rules; ++b) {
      bps[b].rule_id = "r" + std::to_string(b);
      bps[b].rule_index = b;
      std::sort(bps[b].members.begin(), bps[b].members.end());
    }
    InstanceWeights w = InstanceWeights::uniform(40);
    for (auto& x : w.weight) x = static_cast<double>(1 + uniform_index(rng, 9));
    const std::size_t eta = 1 + uniform_index(rng, 24);
    const std::size_t k = 1 + uniform_index(rng, 6);
    const auto plan = select_ip(bps, w, eta, k);
    bool feasible = false;
    const double oracle = brute_force_ip(bps, w, eta, k, feasible);
    if (!feasible || plan.objective(w) != oracle) ++mismatches;
  }
  report(4, "IP selection equals brute-force optimum", mismatches == 0,
         std::to_string(100 - mismatches) + "/100 instances exact");
}

// ---------------------------------------------------------------------------
// Criterion 5: relaxation against exhaustive subset search with linear scans.

void criterion_relaxation_oracle() {
  Rng rng(777);
  auto schema = std::make_shared<const Schema>(
      std::vector<Attribute>{{"a", AttributeKind::numeric, {}},
                             {"b", AttributeKind::numeric, {}},
                             {"c", AttributeKind::categorical, {"x", "y", "z"}},
                             {"d", AttributeKind::numeric, {}}},
      "label", std::vector<std::string>{"n", "p"});
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Dataset d(schema);
    const std::size_t n = 10 + uniform_index(rng, 60);
    for (std::size_t i = 0; i < n; ++i)
      d.add({{static_cast<double>(uniform_index(rng, 10)), static_cast<double>(uniform_index(rng, 10)),
              static_cast<double>(uniform_index(rng, 3)), static_cast<double>(uniform_index(rng, 10))},
             static_cast<LabelId>(uniform_index(rng, 2))});
    Clause clause;
    const std::size_t conds = 1 + uniform_index(rng, 4);
    for (std::size_t c = 0; c < conds; ++c) {
      const std::size_t a = uniform_index(rng, 4);
      if (a == 2) {
        clause.predicates.push_back({a, uniform_index(rng, 2) ? Op::eq : Op::ne, static_cast<double>(uniform_index(rng, 3))});
      } else {
        const Op ops[] = {Op::lt, Op::le, Op::gt, Op::ge, Op::eq};
        clause.predicates.push_back({a, ops[uniform_index(rng, 5)], static_cast<double>(uniform_index(rng, 10))});
      }
    }
    const std::size_t need = std::min<std::size_t>(1 + uniform_index(rng, 12), d.size());
    FeedbackRule rule("r", clause, LabelDistribution::delta(1, 2));
    const auto bp = relax_rule(rule, 0, d, need);

    auto scan = [&](const std::vector<std::size_t>& kept) {
      std::size_t cov = 0;
      for (const auto& row : d.rows()) {
        bool ok = true;
        for (auto c : kept) ok = ok && clause.predicates[c].holds(row.values);
        cov += ok;
      }
      return cov;
    };
    std::vector<std::size_t> all(conds);
    std::iota(all.begin(), all.end(), 0);
    bool ok = true;
    const std::size_t full = scan(all);
    if (full >= need) {
      ok = !bp.relaxed && bp.members.size() == full;
    } else {
      const auto relaxed = relax_clause(clause, d, need);
      std::size_t chosen_level = 0, chosen_cov = 0;
      for (std::size_t level = 1; level <= conds; ++level) {
        std::size_t best = 0;
        for (std::uint64_t mask = 0; mask < (1ULL << conds); ++mask) {
          if (static_cast<std::size_t>(std::popcount(mask)) != conds - level) continue;
          std::vector<std::size_t> kept;
          for (std::size_t c = 0; c < conds; ++c)
            if ((mask >> c) & 1ULL) kept.push_back(c);
          best = std::max(best, scan(kept));
        }
        if (relaxed.level_support.size() < level || relaxed.level_support[level - 1] != best) ok = false;
        if (best >= need) {
          chosen_level = level;
          chosen_cov = best;
          break;
        }
      }
      ok = ok && bp.relaxed && relaxed.deleted.size() == chosen_level && bp.members.size() == chosen_cov &&
           relaxed.level_support.size() == chosen_level;
    }
    if (!ok) ++mismatches;
  }
  report(5, "relaxation matches exhaustive subset search", mismatches == 0,
         std::to_string(100 - mismatches) + "/100 rules exact");
}

// ---------------------------------------------------------------------------
// Criterion 6, property part: 1e5 draws per operator.

bool numeric_window_property(Op op, std::size_t draws, std::string& detail) {
  Rng rng(static_cast<std::uint64_t>(op) + 99);
  const NumericScale scale{-10, 10};
  for (std::size_t i = 0; i < draws; ++i) {
    const double base = -10 + 20 * uniform01(rng), nbr = -10 + 20 * uniform01(rng);
    const double t = -10 + 20 * uniform01(rng);
    const Predicate p{0, op, t};
    const double v = synthesize_numeric(base, nbr, std::span<const Predicate>(&p, 1), scale, rng);
    if (!p.holds(v)) {
      detail = "value " + format_number(v) + " violates condition at threshold " + format_number(t);
      return false;
    }
    if (op == Op::eq) continue;
    const double lo = std::min(base, nbr), hi = std::max(base, nbr);
    Interval w{lo, hi, false, false};
    w.apply(op, t);
    if (!w.empty() && (v < lo || v > hi)) {
      detail = "value " + format_number(v) + " left the segment [" + format_number(lo) + ", " + format_number(hi) + "]";
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Criterion 7

void criterion_probabilistic_frequency() {
  auto schema = benchmark::blobs_schema();
  const auto d = benchmark::make_blobs({}, schema);
  bool all = true;
  std::string detail;
  for (double p : {0.4, 0.6, 0.8, 1.0}) {
    FeedbackRuleSet frs(schema);
    Clause c;
    c.predicates.push_back({0, Op::gt, 1.5});
    c.predicates.push_back({1, Op::lt, 1.0});
    frs.add(FeedbackRule("r1", c, LabelDistribution({1 - p, p})));
    const auto bps = pre_select_bp(d, frs, 5);
    Rng rng = make_rng(5, "frequency", static_cast<std::uint64_t>(p * 10));
    const auto plan = select_random(bps, 2000, rng);
    const auto gen = generate(d, frs, bps, plan, 5, DistanceMetric::fit(d), 17);
    std::size_t hits = 0;
    for (const auto& s : gen.instances) hits += s.instance.label == 1;
    const double freq = static_cast<double>(hits) / static_cast<double>(gen.instances.size());
    const bool ok = gen.instances.size() >= 1000 && std::abs(freq - p) <= 0.05;
    all = all && ok;
    detail += "p=" + fmt(p, 1) + " freq=" + fmt(freq, 3) + " (n=" + std::to_string(gen.instances.size()) + ") ";
  }
  report(7, "probabilistic rule label frequency within 0.05", all, detail);
}

// ---------------------------------------------------------------------------
// Criterion 9

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + FROTE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

nlohmann::json load_without_wall_time(const fs::path& p) {
  std::ifstream in(p);
  auto j = nlohmann::json::parse(in);
  j.erase("wall_time");
  return j;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("frote_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string q = "\"" + dir.string() + "\"";
  bool ok = run_cli("benchmark --out-dir " + q) == 0;
  const std::string data = "--data " + q + "/blobs.csv --schema " + q + "/blobs.schema.json --rules " + q + "/blobs.rules";
  std::vector<std::pair<std::string, std::string>> cases = {
      {"augment " + data + " --model logreg --tau 20 --q 0.5 --k 5 --selector random --strategy relabel --seed 42",
       "lr"},
      {"augment " + data + " --model forest --tau 10 --q 0.3 --k 5 --selector ip --strategy drop --seed 7", "rf"},
      {"augment " + data + " --model tree --tau 10 --q 0.3 --k 3 --eta 8 --selector random --strategy none --seed 3",
       "dt"}};
  std::size_t identical = 0;
  for (const auto& [args, tag] : cases) {
    const auto a = dir / (tag + "_a.json"), b = dir / (tag + "_b.json");
    const auto oa = dir / (tag + "_a.csv"), ob = dir / (tag + "_b.csv");
    ok = ok && run_cli(args + " --report \"" + a.string() + "\" --out \"" + oa.string() + "\"") == 0;
    ok = ok && run_cli(args + " --report \"" + b.string() + "\" --out \"" + ob.string() + "\"") == 0;
    if (ok && load_without_wall_time(a).dump() == load_without_wall_time(b).dump() && slurp(oa) == slurp(ob))
      ++identical;
  }
  // The experiment subcommand as well.
  std::ofstream(dir / "exp.json") << R"({"data": "blobs.csv", "schema": "blobs.schema.json", "model": {"kind": "tree"},
    "frs_size": 1, "tcf": 0.2, "runs": 2, "seed": 5, "pool": {"size": 10, "seed_depth": 3},
    "frote": {"tau": 10, "q": 0.3, "k": 3, "selector": "random", "strategy": "relabel"}})";
  ok = ok && run_cli("experiment --config " + q + "/exp.json --out-dir " + q + "/exp_a") == 0;
  ok = ok && run_cli("experiment --config " + q + "/exp.json --out-dir " + q + "/exp_b") == 0;
  if (ok && load_without_wall_time(dir / "exp_a" / "report.json").dump() ==
                load_without_wall_time(dir / "exp_b" / "report.json").dump())
    ++identical;
  fs::remove_all(dir);
  report(9, "CLI reports byte-identical across repeated invocations", ok && identical == cases.size() + 1,
         std::to_string(identical) + "/" + std::to_string(cases.size() + 1) + " invocations identical");
}

// ---------------------------------------------------------------------------
// Criterion 10

void criterion_gradient_check() {
  Rng rng(31337);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + uniform_index(rng, 16), f = 1 + uniform_index(rng, 4), k = 2 + uniform_index(rng, 3);
    std::vector<double> x(n * f), theta(k * f + k);
    std::vector<LabelId> y(n);
    for (auto& v : x) v = -2 + 4 * uniform01(rng);
    for (auto& v : theta) v = -1 + 2 * uniform01(rng);
    for (auto& v : y) v = uniform_index(rng, k);
    const double l2 = 0.01 + 0.1 * uniform01(rng);
    std::vector<double> grad;
    logistic::loss_and_gradient(x, f, y, k, theta, l2, &grad);
    double diff = 0, norm_a = 0, norm_f = 0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      const double fd = (logistic::loss_and_gradient(x, f, y, k, tp, l2, nullptr) -
                         logistic::loss_and_gradient(x, f, y, k, tm, l2, nullptr)) /
                        (2 * h);
      diff += (grad[i] - fd) * (grad[i] - fd);
      norm_a += grad[i] * grad[i];
      norm_f += fd * fd;
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_f), 1e-12});
    worst = std::max(worst, rel);
  }
  report(10, "LR analytic gradient matches central differences", worst <= 1e-5,
         "max relative error " + sci(worst) + " over 20 problems (tolerance 1e-5)");
}

}  // namespace

int main() {
  auto schema = benchmark::blobs_schema();
  const auto data = benchmark::make_blobs({}, schema);
  const auto rules = benchmark::blobs_rules(schema);

  // Criteria 1-3 share the audited engine runs used by criteria 6 and 8.
  RunAudit audit;
  const auto cfg1 = blobs_config(0.0, Selector::random);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r1 = run_experiment(cfg1, data, rules, audit.hooks(cfg1.frote));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<double> dmra, f1drop;
  for (const auto& r : r1.runs) {
    dmra.push_back(r.final.mra.value_or(0) - r.initial.mra.value_or(0));
    f1drop.push_back(r.initial.f1.value_or(0) - r.final.f1.value_or(0));
  }
  const double md = median(dmra), mf = median(f1drop);
  report(1, "tcf=0 directional reproduction (LR, relabel, tau=50, q=0.5, 10 runs)",
         md >= 0.3 && mf <= 0.05 && secs <= 60.0,
         "median dMRA " + fmt(md) + " (>= 0.3), median F1 drop " + fmt(mf) + " (<= 0.05), runtime " + fmt(secs, 2) +
             " s (<= 60)");

  const auto cfg2 = blobs_config(0.2, Selector::random);
  const auto r2 = run_experiment(cfg2, data, rules, audit.hooks(cfg2.frote));
  std::size_t wins = 0;
  for (const auto& r : r2.runs) wins += r.final.j_bar >= r.modified.j_bar;
  report(2, "tcf=0.2 final J-bar >= relabel-only J-bar", wins >= 7, std::to_string(wins) + "/10 runs (need 7)");

  const auto cfg3 = blobs_config(0.2, Selector::ip);
  const auto r3 = run_experiment(cfg3, data, rules, audit.hooks(cfg3.frote));
  double added_random = 0, added_ip = 0;
  for (const auto& r : r2.runs) added_random += static_cast<double>(r.instances_added);
  for (const auto& r : r3.runs) added_ip += static_cast<double>(r.instances_added);
  added_random /= static_cast<double>(r2.runs.size());
  added_ip /= static_cast<double>(r3.runs.size());
  report(3, "IP adds no more instances than random (10 paired runs, tcf=0.2)", added_ip <= added_random,
         "mean added ip " + fmt(added_ip, 2) + " vs random " + fmt(added_random, 2));

  criterion_ip_oracle();
  criterion_relaxation_oracle();

  bool props = true;
  std::string prop_detail;
  for (Op op : {Op::lt, Op::le, Op::gt, Op::ge, Op::eq}) {
    std::string why;
    if (!numeric_window_property(op, 100000, why)) {
      props = false;
      prop_detail += " [" + std::string(to_string(op)) + "] " + why;
    }
  }
  report(6, "synthetic instances satisfy their rule; numeric windows hold",
         audit.synthetic > 0 && audit.synthetic_violations == 0 && props,
         std::to_string(audit.synthetic - audit.synthetic_violations) + "/" + std::to_string(audit.synthetic) +
             " synthetic rows over " + std::to_string(audit.runs) + " runs satisfy their rule; 1e5 draws per operator " +
             (props ? "clean" : "failed:" + prop_detail));

  criterion_probabilistic_frequency();

  report(8, "accepted j-hat strictly decreasing, quota respected, eta = ceil(q|D|/tau)",
         audit.runs == 30 && audit.monotonic_violations == 0 && audit.quota_violations == 0 &&
             audit.eta_mismatches == 0,
         std::to_string(audit.runs) + " runs; monotonicity violations " + std::to_string(audit.monotonic_violations) +
             ", quota violations " + std::to_string(audit.quota_violations) + ", eta mismatches " +
             std::to_string(audit.eta_mismatches));

  criterion_cli_determinism();
  criterion_gradient_check();

  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
