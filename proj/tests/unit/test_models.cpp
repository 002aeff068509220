#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "support.hpp"

using namespace frote;

namespace {

Dataset separable(std::size_t n, Rng& rng) {
  auto s = std::make_shared<const Schema>(
      std::vector<Attribute>{{"x", AttributeKind::numeric, {}},
                             {"y", AttributeKind::numeric, {}},
                             {"c", AttributeKind::categorical, {"u", "v"}}},
      "label", std::vector<std::string>{"neg", "pos"});
  Dataset d(s);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -5 + 10 * uniform01(rng), y = -5 + 10 * uniform01(rng);
    d.add({{x, y, static_cast<double>(uniform_index(rng, 2))}, LabelId(x + y > 0)});
  }
  return d;
}

double accuracy(const Model& m, const Dataset& d) {
  const auto p = m.predict_all(d);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.size(); ++i) ok += p[i] == d[i].label;
  return static_cast<double>(ok) / static_cast<double>(d.size());
}

}  // namespace

TEST_CASE("logistic gradient agrees with central differences") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 8, f = 3, k = 2 + uniform_index(rng, 2);
    std::vector<double> x(n * f), theta(k * f + k);
    std::vector<LabelId> y(n);
    for (auto& v : x) v = -1 + 2 * uniform01(rng);
    for (auto& v : theta) v = -1 + 2 * uniform01(rng);
    for (auto& v : y) v = uniform_index(rng, k);
    std::vector<double> g;
    logistic::loss_and_gradient(x, f, y, k, theta, 0.05, &g);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto tp = theta, tm = theta;
      tp[i] += 1e-6;
      tm[i] -= 1e-6;
      const double fd = (logistic::loss_and_gradient(x, f, y, k, tp, 0.05, nullptr) -
                         logistic::loss_and_gradient(x, f, y, k, tm, 0.05, nullptr)) /
                        2e-6;
      CHECK(g[i] == Catch::Approx(fd).margin(1e-7));
    }
  }
}

TEST_CASE("each learner fits separable data") {
  Rng rng(1);
  const auto d = separable(400, rng);
  for (const auto* kind : {"logistic_regression", "decision_tree", "random_forest_lite"}) {
    INFO(kind);
    const auto m = train(TrainerSpec::parse(kind), d, 3);
    CHECK(accuracy(m, d) >= 0.95);
  }
}

TEST_CASE("training is deterministic in the seed") {
  Rng rng(2);
  const auto d = separable(200, rng);
  const auto spec = TrainerSpec::parse("random_forest_lite", {{"trees", 15}});
  const auto a = train(spec, d, 4), b = train(spec, d, 4);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.predict_all(d) == b.predict_all(d));
}

TEST_CASE("single-class data gives a constant model") {
  Rng rng(3);
  auto d = separable(30, rng);
  Dataset one(d.schema_ptr());
  for (const auto& r : d.rows())
    if (r.label == 1) one.add(r);
  const auto m = train(TrainerSpec::parse("logreg"), one, 0);
  CHECK(m.kind() == "constant");
  CHECK(m.predict(d[0]) == 1);
}

TEST_CASE("models survive a save/load round trip") {
  Rng rng(4);
  const auto d = separable(150, rng);
  const auto dir = std::filesystem::temp_directory_path();
  for (const auto* kind : {"logreg", "tree", "forest"}) {
    INFO(kind);
    const auto m = train(TrainerSpec::parse(kind), d, 5);
    const auto path = (dir / (std::string("frote_model_") + kind + ".json")).string();
    m.save(path);
    const auto back = Model::load(path, d.schema());
    CHECK(back.predict_all(d) == m.predict_all(d));
    CHECK(back.to_json() == m.to_json());
    std::filesystem::remove(path);
  }
}

TEST_CASE("models refuse other schemas") {
  Rng rng(5);
  const auto d = separable(50, rng);
  const auto m = train(TrainerSpec::parse("tree"), d, 0);
  auto other = testing::mixed_schema();
  CHECK_THROWS_AS(Model::from_json(m.to_json(), *other), ValidationError);
  CHECK_THROWS_AS(m.predict(std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("tree paths partition the training rows") {
  Rng rng(6);
  const auto d = separable(120, rng);
  TreeParams p;
  p.max_depth = 3;
  const auto tree = DecisionTree::fit(d, p, 0);
  const auto paths = tree->paths();
  CHECK(paths.size() == tree->leaf_count());
  std::size_t total = 0;
  for (const auto& path : paths) total += path.samples;
  CHECK(total == d.size());
  for (const auto& row : d.rows()) {
    std::size_t matching = 0;
    for (const auto& path : paths) {
      bool ok = true;
      for (const auto& pr : path.predicates) ok = ok && pr.holds(row.values);
      if (ok) {
        ++matching;
        CHECK(path.majority == tree->predict(row.values));
      }
    }
    CHECK(matching == 1);
  }
}

TEST_CASE("trainer specs reject unknown keys and bad values") {
  CHECK_THROWS_AS(TrainerSpec::parse("svm"), ValidationError);
  CHECK_THROWS_AS(TrainerSpec::parse("logreg", {{"depth", 3}}), ValidationError);
  CHECK_THROWS_AS(TrainerSpec::parse("tree", {{"max_depth", 0}}), ValidationError);
  CHECK_THROWS_AS(TrainerSpec::parse("forest", {{"bag_fraction", 1.5}}), ValidationError);
  const auto s = TrainerSpec::parse("forest", {{"trees", 7}});
  CHECK(s.to_json()["hyperparameters"]["trees"] == 7);
}
