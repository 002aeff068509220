#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace frote;

TEST_CASE("path simplification keeps the tightest numeric bounds") {
  auto s = testing::mixed_schema();
  const std::vector<Predicate> path{{0, Op::le, 4}, {2, Op::gt, 1}, {0, Op::le, 2}, {0, Op::gt, 0},
                                    {1, Op::ne, 0}, {1, Op::ne, 0}, {2, Op::gt, 3}, {1, Op::ne, 2}};
  const auto c = simplify_path(path, *s);
  CHECK(c.predicates == std::vector<Predicate>{{0, Op::gt, 0}, {0, Op::le, 2}, {2, Op::gt, 3}, {1, Op::ne, 0},
                                               {1, Op::ne, 2}});
  const auto eq = simplify_path({{1, Op::ne, 0}, {1, Op::eq, 2}}, *s);
  CHECK(eq.predicates == std::vector<Predicate>{{1, Op::eq, 2}});
}

TEST_CASE("seed rules cover every row exactly once") {
  const auto d = benchmark::make_blobs({});
  const auto seeds = extract_seed_rules(d, 3);
  CHECK(seeds.size() >= 2);
  for (const auto& r : d.rows()) {
    std::size_t n = 0;
    for (const auto& s : seeds) n += s.satisfied_by(r.values);
    CHECK(n == 1);
  }
}

TEST_CASE("reverse operators") {
  CHECK(reverse_op(Op::lt) == Op::gt);
  CHECK(reverse_op(Op::ge) == Op::le);
  CHECK(reverse_op(Op::eq) == Op::ne);
}

TEST_CASE("perturbed pool respects coverage bounds and is unique") {
  const auto d = benchmark::make_blobs({});
  const auto seeds = extract_seed_rules(d, 3);
  Rng rng(3);
  const CoverageBounds bounds{0.05, 0.25};
  const auto pool = perturb_rules(seeds, d, 25, bounds, rng);
  CHECK(pool.rules.size() <= 25);
  CHECK(pool.attempts <= 2500);
  std::set<std::string> seen;
  for (const auto& r : pool.rules) {
    const double frac = static_cast<double>(coverage(r, d).size()) / static_cast<double>(d.size());
    CHECK(frac >= 0.05);
    CHECK(frac < 0.25);
    CHECK(seen.insert(render_rule(r, d.schema())).second);
  }
  CHECK_THROWS_AS(perturb_rules({}, d, 5, bounds, rng), ValidationError);
  CHECK_THROWS_AS(perturb_rules(seeds, d, 5, CoverageBounds{0.3, 0.2}, rng), ValidationError);
}

TEST_CASE("drawn rule sets are conflict-free with disjoint coverage") {
  const auto d = benchmark::make_blobs({});
  const auto seeds = extract_seed_rules(d, 3);
  Rng rng(5);
  const auto pool = perturb_rules(seeds, d, 30, {}, rng);
  REQUIRE(pool.rules.size() >= 3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto frs = draw_rule_set(pool.rules, 3, d.schema_ptr(), rng);
    CHECK(detect_conflicts(frs).empty());
    for (const auto& r : d.rows()) {
      std::size_t n = 0;
      for (const auto& rule : frs) n += rule.satisfied_by(r.values);
      CHECK(n <= 1);
    }
  }
  CHECK_THROWS_AS(draw_rule_set(pool.rules, pool.rules.size() + 1, d.schema_ptr(), rng), ValidationError);
}

TEST_CASE("summaries use the sample standard deviation") {
  const auto s = Summary::of({1, 2, 3, 4});
  CHECK(s.mean == Catch::Approx(2.5));
  CHECK(s.std == Catch::Approx(std::sqrt(5.0 / 3)));
  CHECK(Summary::of({7}).std == 0);
  CHECK(Summary::of({}).count == 0);
}

TEST_CASE("experiments are reproducible and aggregates match the runs") {
  const auto d = benchmark::make_blobs({});
  ExperimentConfig cfg;
  cfg.trainer = TrainerSpec::parse("tree", {{"max_depth", 3}});
  cfg.frs_size = 2;
  cfg.tcf = 0.2;
  cfg.runs = 3;
  cfg.seed = 9;
  cfg.pool_size = 20;
  cfg.frote.tau = 8;
  cfg.frote.q = 0.3;
  cfg.frote.k = 3;
  const auto a = run_experiment(cfg, d);
  const auto b = run_experiment(cfg, d);
  CHECK(a.to_json() == b.to_json());
  REQUIRE(a.runs.size() == 3);

  std::vector<double> final_j;
  for (const auto& r : a.runs) final_j.push_back(r.final.j_bar);
  const auto agg = a.aggregate();
  CHECK(agg["final.j_bar"]["mean"].get<double>() == Catch::Approx(Summary::of(final_j).mean));
  CHECK(agg["final.j_bar"]["std"].get<double>() == Catch::Approx(Summary::of(final_j).std));
  for (const auto& r : a.runs) CHECK(r.train_rows + r.test_rows == d.size());
}

TEST_CASE("fixed rule sets split covered rows by tcf") {
  const auto d = benchmark::make_blobs({});
  const auto rules = benchmark::blobs_rules(d.schema_ptr());
  const auto covered = coverage(rules[0], d).size();
  ExperimentConfig cfg;
  cfg.tcf = 0.2;
  cfg.runs = 1;
  cfg.frote.tau = 2;
  std::size_t covered_in_train = 0;
  ExperimentHooks hooks;
  hooks.on_run = [&](std::size_t, const FeedbackRuleSet& frs, const AugmentationResult& res) {
    for (std::size_t i = 0; i < res.modified_rows; ++i) covered_in_train += frs[0].satisfied_by(res.dataset[i].values);
  };
  run_experiment(cfg, d, rules, hooks);
  CHECK(covered_in_train == static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(covered) + 0.5)));
}

TEST_CASE("experiment configs are parsed strictly") {
  const auto ok = nlohmann::json::parse(R"({"data": "d.csv", "schema": "s.json", "model": {"kind": "forest",
    "hyperparameters": {"trees": 5}}, "tcf": 0.2, "runs": 4, "frote": {"tau": 10, "selector": "ip", "eta": 3}})");
  const auto c = ExperimentConfig::from_json(ok, "/base");
  CHECK(c.data == "/base/d.csv");
  CHECK(c.trainer.forest.trees == 5);
  CHECK(c.frote.selector == Selector::ip);
  CHECK(c.frote.eta_override == std::size_t{3});
  CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());

  auto bad = ok;
  bad["colour"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ValidationError);
  bad = ok;
  bad["frote"]["speed"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ValidationError);
  bad = ok;
  bad["tcf"] = 1.5;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ValidationError);
  bad = ok;
  bad.erase("data");
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ValidationError);
}
