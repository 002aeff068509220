#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "frote/domain.hpp"
#include "frote/rules.hpp"

namespace frote {

struct RuleConflict {
  std::string first;
  std::string second;

  friend bool operator==(const RuleConflict&, const RuleConflict&) = default;
};

/// Pairs (i < j) whose coverages meet somewhere in the domain while their label
/// distributions differ.
inline std::vector<RuleConflict> detect_conflicts(const FeedbackRuleSet& frs) {
  const auto& schema = frs.schema();
  std::vector<Region> regions;
  regions.reserve(frs.size());
  for (const auto& r : frs) regions.push_back(region_of(r, schema));
  std::vector<RuleConflict> out;
  for (std::size_t i = 0; i < frs.size(); ++i)
    for (std::size_t j = i + 1; j < frs.size(); ++j)
      if (!(frs[i].distribution == frs[j].distribution) && regions_intersect(regions[i], regions[j]))
        out.push_back({frs[i].id, frs[j].id});
  return out;
}

struct ConflictPolicy {
  enum class Kind { exclude_intersection, mixture };
  Kind kind = Kind::exclude_intersection;
  double weight = 0.5;  // weight of the first rule's distribution in a mixture

  static ConflictPolicy exclude() { return {Kind::exclude_intersection, 0.5}; }
  static ConflictPolicy mix(double w = 0.5) { return {Kind::mixture, w}; }
};

namespace detail {

inline std::vector<Clause> clauses_of(const FeedbackRule& r) {
  std::vector<Clause> out;
  for (const auto& t : r.terms) out.push_back(t.clause);
  return out;
}

inline void exclude_clauses(FeedbackRule& rule, const std::vector<Clause>& clauses) {
  for (auto& t : rule.terms)
    for (const auto& c : clauses)
      if (std::find(t.exclusions.begin(), t.exclusions.end(), c) == t.exclusions.end()) t.exclusions.push_back(c);
}

/// Rule covering exactly the intersection of two rules' clauses.
inline FeedbackRule intersection_rule(const FeedbackRule& a, const FeedbackRule& b, double w) {
  FeedbackRule r;
  r.id = a.id + "^" + b.id;
  for (const auto& ta : a.terms) {
    for (const auto& tb : b.terms) {
      Term t{conjoin(ta.clause, tb.clause), ta.exclusions};
      for (const auto& e : tb.exclusions)
        if (std::find(t.exclusions.begin(), t.exclusions.end(), e) == t.exclusions.end()) t.exclusions.push_back(e);
      r.terms.push_back(std::move(t));
    }
  }
  r.distribution = LabelDistribution::mixture(a.distribution, b.distribution, w);
  return r;
}

inline std::vector<std::vector<double>> canonical(const Clause& c) {
  std::vector<std::vector<double>> key;
  for (const auto& p : c.predicates)
    key.push_back({static_cast<double>(p.attribute), static_cast<double>(p.op), p.value});
  std::sort(key.begin(), key.end());
  return key;
}

inline bool same_terms(const FeedbackRule& a, const FeedbackRule& b) {
  if (a.terms.size() != b.terms.size()) return false;
  for (std::size_t t = 0; t < a.terms.size(); ++t) {
    const auto& x = a.terms[t];
    const auto& y = b.terms[t];
    if (canonical(x.clause) != canonical(y.clause) || x.exclusions.size() != y.exclusions.size()) return false;
    std::vector<std::vector<std::vector<double>>> ex, ey;
    for (const auto& e : x.exclusions) ex.push_back(canonical(e));
    for (const auto& e : y.exclusions) ey.push_back(canonical(e));
    std::sort(ex.begin(), ex.end());
    std::sort(ey.begin(), ey.end());
    if (ex != ey) return false;
  }
  return true;
}

/// Collapses intersection rules that cover the same region into one rule whose
/// distribution is the equal-weight average of theirs.
inline std::vector<FeedbackRule> dedupe_regions(std::vector<FeedbackRule> rules) {
  std::vector<FeedbackRule> out;
  std::vector<std::vector<LabelDistribution>> members;
  for (auto& r : rules) {
    auto it = std::find_if(out.begin(), out.end(), [&](const FeedbackRule& o) { return same_terms(o, r); });
    if (it == out.end()) {
      members.push_back({r.distribution});
      out.push_back(std::move(r));
    } else {
      members[static_cast<std::size_t>(it - out.begin())].push_back(r.distribution);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (members[i].size() == 1) continue;
    std::vector<double> p(members[i].front().size(), 0.0);
    for (const auto& d : members[i])
      for (std::size_t l = 0; l < p.size(); ++l) p[l] += d.probability(l) / static_cast<double>(members[i].size());
    out[i].distribution = LabelDistribution(std::move(p));
  }
  return out;
}

}  // namespace detail

/// Makes the rule set conflict-free. Each conflicting pair has the other's clause
/// appended to its exclusions; under the mixture policy a new rule with the blended
/// distribution covers the removed intersection. Repeats until no conflicts remain.
inline FeedbackRuleSet resolve_conflicts(const FeedbackRuleSet& frs, ConflictPolicy policy) {
  FeedbackRuleSet current = frs;
  constexpr int kMaxRounds = 16;
  for (int round = 0; round < kMaxRounds; ++round) {
    const auto conflicts = detect_conflicts(current);
    if (conflicts.empty()) return current;

    std::vector<FeedbackRule> rules = current.rules();
    const std::vector<FeedbackRule> before = rules;
    auto index_of = [&](const std::string& id) {
      for (std::size_t i = 0; i < before.size(); ++i)
        if (before[i].id == id) return i;
      throw Error("unknown rule id '" + id + "'");
    };
    std::vector<FeedbackRule> added;
    for (const auto& c : conflicts) {
      const auto i = index_of(c.first);
      const auto j = index_of(c.second);
      detail::exclude_clauses(rules[i], detail::clauses_of(before[j]));
      detail::exclude_clauses(rules[j], detail::clauses_of(before[i]));
      if (policy.kind == ConflictPolicy::Kind::mixture) {
        auto inter = detail::intersection_rule(before[i], before[j], policy.weight);
        if (satisfiable(inter, current.schema())) added.push_back(std::move(inter));
      }
    }
    for (auto& r : detail::dedupe_regions(std::move(added))) rules.push_back(std::move(r));
    current = FeedbackRuleSet(frs.schema_ptr(), std::move(rules));
  }
  if (!detect_conflicts(current).empty()) throw Error("conflict resolution did not converge");
  return current;
}

/// Groups overlapping rules that share a distribution (transitively) into one rule
/// whose terms are the members' terms. The result has pairwise-disjoint coverage when
/// the input is conflict-free.
inline FeedbackRuleSet merge_overlapping(const FeedbackRuleSet& frs) {
  const auto n = frs.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<Region> regions;
  for (const auto& r : frs) regions.push_back(region_of(r, frs.schema()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (frs[i].distribution == frs[j].distribution && regions_intersect(regions[i], regions[j])) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  std::vector<FeedbackRule> out;
  std::vector<std::optional<std::size_t>> slot(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = find(i);
    if (!slot[root]) {
      slot[root] = out.size();
      out.push_back(frs[i]);
    } else {
      auto& g = out[*slot[root]];
      g.id += "|" + frs[i].id;
      for (const auto& t : frs[i].terms) g.terms.push_back(t);
    }
  }
  return FeedbackRuleSet(frs.schema_ptr(), std::move(out));
}

}  // namespace frote
