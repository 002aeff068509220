#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace frote;

namespace {

bool grid_intersects(const FeedbackRule& a, const FeedbackRule& b, const Schema& s) {
  for (const auto& p : testing::grid(s))
    if (a.satisfied_by(p) && b.satisfied_by(p)) return true;
  return false;
}

}  // namespace

TEST_CASE("predicates evaluate each operator") {
  CHECK(Predicate{0, Op::lt, 1}.holds(0.5));
  CHECK_FALSE(Predicate{0, Op::lt, 1}.holds(1));
  CHECK(Predicate{0, Op::le, 1}.holds(1));
  CHECK(Predicate{0, Op::gt, 1}.holds(1.5));
  CHECK_FALSE(Predicate{0, Op::gt, 1}.holds(1));
  CHECK(Predicate{0, Op::ge, 1}.holds(1));
  CHECK(Predicate{0, Op::eq, 2}.holds(2));
  CHECK(Predicate{0, Op::ne, 2}.holds(1));
}

TEST_CASE("parser reads deterministic and probabilistic rules") {
  auto s = testing::mixed_schema();
  const auto frs = parse_rule_set(
      "# comment\n"
      "IF a > 1 AND c = \"y\" THEN class = l1\n"
      "\n"
      "if b <= 2.5 and c != x then label ~ {l0: 0.25, l2: 0.75}\n",
      s);
  REQUIRE(frs.size() == 2);
  CHECK(frs[0].id == "r1");
  CHECK(frs[1].id == "r2");
  CHECK(frs[0].clause().predicates == std::vector<Predicate>{{0, Op::gt, 1}, {1, Op::eq, 1}});
  CHECK(frs[0].distribution.deterministic_label() == LabelId{1});
  CHECK(frs[1].distribution.probability(2) == Catch::Approx(0.75));
  CHECK_FALSE(frs[1].distribution.deterministic_label());

  // Rendering parses back to the same rule.
  const auto again = parse_rule_set(render_rule_set(frs), s);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(again[i].clause().predicates == frs[i].clause().predicates);
    CHECK(again[i].distribution == frs[i].distribution);
  }
}

TEST_CASE("parser errors carry line and column") {
  auto s = testing::mixed_schema();
  auto error_at = [&](const std::string& text) -> std::pair<std::size_t, std::size_t> {
    try {
      parse_rule_set(text, s);
    } catch (const ParseError& e) {
      return {e.line(), e.column()};
    }
    return {0, 0};
  };
  CHECK(error_at("IF q > 1 THEN class = l0").first == 1);
  CHECK(error_at("IF a > 1 THEN class = l0\nIF a > 1 THEN class = nope").first == 2);
  CHECK(error_at("IF c > x THEN class = l0").second > 0);
  CHECK(error_at("IF a > x THEN class = l0").second > 0);
  CHECK(error_at("IF a > 1 THEN class ~ {l0: 0.5, l1: 0.4}").first == 1);
  CHECK(error_at("IF a > 1 THEN class ~ {l0: 0.5, l0: 0.5}").first == 1);
  CHECK(error_at("IF a > 1 class = l0").first == 1);
  CHECK(error_at("IF a > 1 THEN class = l0 extra").first == 1);
  CHECK(error_at("IF c = w THEN class = l0").first == 1);
}

TEST_CASE("coverage agrees with a linear scan") {
  Rng rng(11);
  auto s = testing::mixed_schema();
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = testing::random_dataset(s, 40, rng);
    FeedbackRule r("r", testing::random_clause(*s, rng), LabelDistribution::delta(0, 3));
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < d.size(); ++i) {
      bool ok = true;
      for (const auto& p : r.clause().predicates) ok = ok && p.holds(d[i].values[p.attribute]);
      if (ok) expected.push_back(i);
    }
    CHECK(coverage(r, d) == expected);
  }
}

TEST_CASE("sampled labels follow the distribution") {
  Rng rng(5);
  const LabelDistribution dist({0.2, 0.0, 0.8});
  std::size_t counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) ++counts[sample_label(dist, rng)];
  CHECK(counts[1] == 0);
  CHECK(static_cast<double>(counts[2]) / 20000 == Catch::Approx(0.8).margin(0.02));
}

TEST_CASE("domain intersection agrees with grid enumeration") {
  Rng rng(21);
  auto s = testing::mixed_schema();
  for (int trial = 0; trial < 300; ++trial) {
    FeedbackRule a("a", testing::random_clause(*s, rng), LabelDistribution::delta(0, 3));
    FeedbackRule b("b", testing::random_clause(*s, rng), LabelDistribution::delta(1, 3));
    if (uniform_index(rng, 2)) a.terms[0].exclusions.push_back(testing::random_clause(*s, rng, 2));
    INFO(describe_rule(a, *s) << " vs " << describe_rule(b, *s));
    CHECK(domains_intersect(a, b, *s) == grid_intersects(a, b, *s));
    bool any = false;
    for (const auto& p : testing::grid(*s)) any = any || a.satisfied_by(p);
    CHECK(satisfiable(a, *s) == any);
  }
}

TEST_CASE("strict bounds on the same value do not intersect") {
  auto s = testing::mixed_schema();
  const auto frs = parse_rule_set("IF a < 2 THEN class = l0\nIF a >= 2 THEN class = l1\nIF a <= 2 THEN class = l2\n", s);
  CHECK_FALSE(domains_intersect(frs[0], frs[1], *s));
  CHECK(domains_intersect(frs[1], frs[2], *s));
}

TEST_CASE("conflicts are reported for overlapping rules with different outcomes") {
  auto s = testing::mixed_schema();
  const auto frs = parse_rule_set(
      "IF a > 1 THEN class = l0\n"
      "IF a > 3 THEN class = l0\n"
      "IF b < 2 THEN class = l1\n"
      "IF a < 0 AND b > 3 THEN class = l2\n",
      s);
  const auto c = detect_conflicts(frs);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == RuleConflict{"r1", "r3"});
  CHECK(c[1] == RuleConflict{"r2", "r3"});
}

TEST_CASE("resolution leaves no conflicts and keeps exclusive regions") {
  Rng rng(8);
  auto s = testing::mixed_schema();
  const auto points = testing::grid(*s);
  for (int trial = 0; trial < 40; ++trial) {
    FeedbackRuleSet frs(s);
    for (int r = 0; r < 3; ++r)
      frs.add(FeedbackRule("r" + std::to_string(r + 1), testing::random_clause(*s, rng, 2),
                           LabelDistribution::delta(uniform_index(rng, 3), 3)));
    for (auto policy : {ConflictPolicy::exclude(), ConflictPolicy::mix(0.5)}) {
      const auto out = resolve_conflicts(frs, policy);
      CHECK(detect_conflicts(out).empty());
      for (const auto& p : points) {
        std::vector<std::size_t> covering;
        for (std::size_t r = 0; r < frs.size(); ++r)
          if (frs[r].satisfied_by(p)) covering.push_back(r);
        // A point covered by exactly one original rule keeps that rule's outcome.
        if (covering.size() == 1) {
          const auto* kept = out.find(frs[covering[0]].id);
          REQUIRE(kept);
          bool conflicting_neighbor = false;
          for (std::size_t r = 0; r < frs.size(); ++r)
            if (r != covering[0] && !(frs[r].distribution == frs[covering[0]].distribution)) conflicting_neighbor = true;
          if (!conflicting_neighbor) CHECK(kept->satisfied_by(p));
        }
      }
    }
  }
}

TEST_CASE("mixture policy adds the intersection with mixed outcome") {
  auto s = testing::mixed_schema();
  const auto frs = parse_rule_set("IF a > 1 THEN class = l0\nIF b > 1 THEN class = l1\n", s);
  const auto out = resolve_conflicts(frs, ConflictPolicy::mix(0.25));
  REQUIRE(out.size() == 3);
  const std::vector<double> both{3, 0, 3};
  CHECK_FALSE(out[0].satisfied_by(both));
  CHECK_FALSE(out[1].satisfied_by(both));
  CHECK(out[2].satisfied_by(both));
  CHECK(out[2].distribution.probability(0) == Catch::Approx(0.25));
  CHECK(out[2].distribution.probability(1) == Catch::Approx(0.75));
  CHECK(resolve_conflicts(frs, ConflictPolicy::exclude()).size() == 2);
}

TEST_CASE("merging groups same-outcome overlaps transitively") {
  auto s = testing::mixed_schema();
  const auto frs = parse_rule_set(
      "IF a < 2 THEN class = l0\n"
      "IF a > 1 AND a < 4 THEN class = l0\n"
      "IF a > 3 THEN class = l0\n"
      "IF b > 3 AND a > 9 THEN class = l1\n",
      s);
  const auto m = merge_overlapping(frs);
  REQUIRE(m.size() == 2);
  CHECK(m[0].id == "r1|r2|r3");
  CHECK(m[0].terms.size() == 3);
  for (const auto& p : testing::grid(*s))
    CHECK(m[0].satisfied_by(p) == (frs[0].satisfied_by(p) || frs[1].satisfied_by(p) || frs[2].satisfied_by(p)));
}
