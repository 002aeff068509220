// Command-line front end: augment, experiment, rules, benchmark.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "frote/frote.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void write_text(const std::string& path, const std::string& text) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw frote::Error("cannot write '" + path + "'");
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct AugmentArgs {
  std::string data, schema, rules, model = "logreg", out, report, model_out, hyper = "{}";
  std::size_t tau = 200, k = 5;
  double q = 0.5;
  std::optional<std::size_t> eta;
  std::string selector = "random", strategy = "relabel";
  std::uint64_t seed = 0;
};

int run_augment(const AugmentArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  auto schema = frote::load_schema(a.schema);
  const auto data = frote::load_dataset(a.data, schema);
  const auto frs = frote::prepare_rule_set(frote::load_rule_set(a.rules, schema));
  json hyper;
  try {
    hyper = json::parse(a.hyper);
  } catch (const json::exception& e) {
    throw frote::ValidationError(std::string("--hyper: ") + e.what());
  }
  const auto spec = frote::TrainerSpec::parse(a.model, hyper);

  frote::FroteConfig cfg;
  cfg.tau = a.tau;
  cfg.q = a.q;
  cfg.k = a.k;
  cfg.eta_override = a.eta;
  cfg.selector = frote::parse_selector(a.selector);
  cfg.strategy = frote::parse_strategy(a.strategy);
  cfg.seed = a.seed;

  const auto res = frote::run_frote(cfg, data, frs, spec);
  if (!a.out.empty()) frote::save_dataset(a.out, res.dataset);
  if (!a.model_out.empty()) res.model.save(a.model_out);

  json report{{"command", "augment"},
              {"config",
               {{"data", a.data},
                {"schema", a.schema},
                {"rules", a.rules},
                {"model", spec.to_json()},
                {"frote", cfg.to_json()}}},
              {"rule_set", frote::rule_set_to_json(frs)},
              {"result", res.to_json()},
              {"instances_added", res.instances_added},
              {"wall_time", seconds_since(t0)}};
  if (!a.report.empty())
    write_json(a.report, report);
  else
    std::cout << report.dump(2) << '\n';
  return kExitOk;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ifstream in(config_path);
  if (!in) throw frote::ValidationError("cannot open config '" + config_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw frote::ValidationError(config_path + ": " + e.what());
  }
  const auto cfg = frote::ExperimentConfig::from_json(j, fs::path(config_path).parent_path());
  const auto report = frote::run_experiment(cfg);
  json out = report.to_json();
  out["wall_time"] = seconds_since(t0);
  fs::create_directories(out_dir);
  write_json((fs::path(out_dir) / "report.json").string(), out);
  const auto agg = out["aggregate"];
  std::cout << "runs: " << report.runs.size() << "\n";
  for (const char* key : {"initial.j_bar", "mod.j_bar", "final.j_bar", "instances_added"})
    std::cout << key << ": " << agg[key]["mean"].get<double>() << " +- " << agg[key]["std"].get<double>() << "\n";
  return kExitOk;
}

int run_rules_check(const std::string& schema_path, const std::string& rules_path, const std::string& data_path) {
  auto schema = frote::load_schema(schema_path);
  const auto frs = frote::load_rule_set(rules_path, schema);
  std::optional<frote::Dataset> data;
  if (!data_path.empty()) data = frote::load_dataset(data_path, schema);
  json rules = json::array();
  bool ok = true;
  for (const auto& r : frs) {
    json e{{"id", r.id}, {"rule", frote::describe_rule(r, *schema)}, {"satisfiable", frote::satisfiable(r, *schema)}};
    ok = ok && e["satisfiable"].get<bool>();
    if (data) {
      const auto cov = frote::coverage(r, *data).size();
      e["coverage"] = cov;
      e["coverage_fraction"] = data->empty() ? 0.0 : static_cast<double>(cov) / static_cast<double>(data->size());
    }
    rules.push_back(std::move(e));
  }
  json conflicts = json::array();
  for (const auto& c : frote::detect_conflicts(frs)) conflicts.push_back({c.first, c.second});
  ok = ok && conflicts.empty();
  std::cout << json{{"rules", rules}, {"conflicts", conflicts}, {"ok", ok}}.dump(2) << '\n';
  return ok ? kExitOk : kExitValidation;
}

int run_rules_resolve(const std::string& schema_path, const std::string& rules_path, const std::string& policy,
                      double weight, const std::string& out) {
  auto schema = frote::load_schema(schema_path);
  const auto frs = frote::load_rule_set(rules_path, schema);
  frote::ConflictPolicy p;
  if (policy == "exclude")
    p = frote::ConflictPolicy::exclude();
  else if (policy == "mixture")
    p = frote::ConflictPolicy::mix(weight);
  else
    throw frote::ValidationError("unknown policy '" + policy + "'");
  const auto resolved = frote::merge_overlapping(frote::resolve_conflicts(frs, p));
  const auto j = frote::rule_set_to_json(resolved);
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json(out, j);
  return kExitOk;
}

int run_rules_perturb(const std::string& schema_path, const std::string& data_path, std::size_t count, double lo,
                      double hi, std::size_t depth, std::uint64_t seed, const std::string& out) {
  auto schema = frote::load_schema(schema_path);
  const auto data = frote::load_dataset(data_path, schema);
  const auto seeds = frote::extract_seed_rules(data, depth, frote::derive_seed(seed, "seed-tree"));
  frote::Rng rng = frote::make_rng(seed, "pool");
  const auto pool = frote::perturb_rules(seeds, data, count, {lo, hi}, rng);
  if (!pool.complete)
    std::cerr << "warning: attempt cap reached with " << pool.rules.size() << " of " << count << " rules\n";
  const frote::FeedbackRuleSet frs(schema, pool.rules);
  const auto text = frote::render_rule_set(frs);
  if (out.empty())
    std::cout << text;
  else
    write_text(out, text);
  return kExitOk;
}

int run_benchmark(const std::string& out_dir, const frote::benchmark::BlobsSpec& spec) {
  auto schema = frote::benchmark::blobs_schema();
  const auto d = frote::benchmark::make_blobs(spec, schema);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  frote::save_dataset((dir / "blobs.csv").string(), d);
  write_json((dir / "blobs.schema.json").string(), schema->to_json());
  write_text((dir / "blobs.rules").string(), frote::benchmark::kBlobsRule);
  std::cout << "wrote " << d.size() << " rows to " << (dir / "blobs.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback-rule oversampling for editing tabular classifiers"};
  app.require_subcommand(1);

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "Run the augmentation loop on one dataset");
  augment->add_option("--data", aug.data, "Training CSV")->required();
  augment->add_option("--schema", aug.schema, "Schema JSON")->required();
  augment->add_option("--rules", aug.rules, "Rule file (DSL or JSON)")->required();
  augment->add_option("--model", aug.model, "logreg | forest | tree")->check(CLI::IsMember({"logreg", "forest", "tree"}));
  augment->add_option("--hyper", aug.hyper, "Model hyperparameters as a JSON object");
  augment->add_option("--tau", aug.tau, "Iteration limit")->check(CLI::PositiveNumber);
  augment->add_option("--q", aug.q, "Oversampling fraction")->check(CLI::PositiveNumber);
  augment->add_option("--k", aug.k, "Neighbour count")->check(CLI::PositiveNumber);
  augment->add_option("--eta", aug.eta, "Instances per iteration (default ceil(q|D|/tau))")->check(CLI::PositiveNumber);
  augment->add_option("--selector", aug.selector, "random | ip")->check(CLI::IsMember({"random", "ip"}));
  augment->add_option("--strategy", aug.strategy, "none | relabel | drop")
      ->check(CLI::IsMember({"none", "relabel", "drop"}));
  augment->add_option("--seed", aug.seed, "Master seed");
  augment->add_option("--out", aug.out, "Augmented dataset CSV");
  augment->add_option("--report", aug.report, "Run report JSON (stdout when omitted)");
  augment->add_option("--model-out", aug.model_out, "Save the final model");

  std::string config_path, out_dir;
  auto* experiment = app.add_subcommand("experiment", "Run a multi-run experiment from a config file");
  experiment->add_option("--config", config_path, "Experiment JSON")->required();
  experiment->add_option("--out-dir", out_dir, "Directory for report.json")->required();

  auto* rules = app.add_subcommand("rules", "Validate, resolve or generate rules");
  rules->require_subcommand(1);
  std::string r_schema, r_rules, r_data, r_out, policy = "exclude";
  double weight = 0.5, lo = 0.05, hi = 0.25;
  std::size_t count = 50, depth = 3;
  std::uint64_t r_seed = 0;
  auto* check = rules->add_subcommand("check", "Parse rules, report satisfiability, coverage and conflicts");
  check->add_option("--schema", r_schema)->required();
  check->add_option("--rules", r_rules)->required();
  check->add_option("--data", r_data, "Optional CSV for coverage counts");
  auto* resolve = rules->add_subcommand("resolve", "Resolve conflicts and merge same-label overlaps");
  resolve->add_option("--schema", r_schema)->required();
  resolve->add_option("--rules", r_rules)->required();
  resolve->add_option("--policy", policy, "exclude | mixture")->check(CLI::IsMember({"exclude", "mixture"}));
  resolve->add_option("--weight", weight, "Mixture weight of the first rule")->check(CLI::Range(0.0, 1.0));
  resolve->add_option("--out", r_out, "Resolved rule set JSON");
  auto* perturb = rules->add_subcommand("perturb", "Build a perturbed rule pool from decision-tree seed rules");
  perturb->add_option("--schema", r_schema)->required();
  perturb->add_option("--data", r_data)->required();
  perturb->add_option("--count", count)->check(CLI::PositiveNumber);
  perturb->add_option("--lo", lo, "Minimum coverage fraction");
  perturb->add_option("--hi", hi, "Coverage fraction upper bound (exclusive)");
  perturb->add_option("--depth", depth, "Seed tree depth")->check(CLI::PositiveNumber);
  perturb->add_option("--seed", r_seed);
  perturb->add_option("--out", r_out, "Pool rule file");

  std::string bench_dir;
  frote::benchmark::BlobsSpec blobs;
  auto* bench = app.add_subcommand("benchmark", "Write the bundled two-blob benchmark");
  bench->add_option("--out-dir", bench_dir)->required();
  bench->add_option("--per-class", blobs.per_class)->check(CLI::PositiveNumber);
  bench->add_option("--sigma", blobs.sigma)->check(CLI::PositiveNumber);
  bench->add_option("--neg-x", blobs.neg_x);
  bench->add_option("--neg-y", blobs.neg_y);
  bench->add_option("--pos-x", blobs.pos_x);
  bench->add_option("--pos-y", blobs.pos_y);
  bench->add_option("--seed", blobs.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*augment) return run_augment(aug);
    if (*experiment) return run_experiment_cmd(config_path, out_dir);
    if (*check) return run_rules_check(r_schema, r_rules, r_data);
    if (*resolve) return run_rules_resolve(r_schema, r_rules, policy, weight, r_out);
    if (*perturb) return run_rules_perturb(r_schema, r_data, count, lo, hi, depth, r_seed, r_out);
    if (*bench) return run_benchmark(bench_dir, blobs);
  } catch (const frote::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
