#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "frote/dataset.hpp"
#include "frote/error.hpp"
#include "frote/rng.hpp"

namespace frote {

enum class Op { eq, ne, lt, le, gt, ge };

inline std::string_view to_string(Op op) {
  switch (op) {
    case Op::eq: return "=";
    case Op::ne: return "!=";
    case Op::lt: return "<";
    case Op::le: return "<=";
    case Op::gt: return ">";
    case Op::ge: return ">=";
  }
  return "?";
}

inline std::optional<Op> parse_op(std::string_view s) {
  if (s == "=" || s == "==") return Op::eq;
  if (s == "!=") return Op::ne;
  if (s == "<") return Op::lt;
  if (s == "<=") return Op::le;
  if (s == ">") return Op::gt;
  if (s == ">=") return Op::ge;
  return std::nullopt;
}

/// Categorical attributes admit only equality tests; numeric attributes admit everything but "!=".
inline bool op_allowed(AttributeKind kind, Op op) {
  if (kind == AttributeKind::categorical) return op == Op::eq || op == Op::ne;
  return op != Op::ne;
}

/// (attribute, operator, value). For categorical attributes `value` is a category index.
struct Predicate {
  std::size_t attribute = 0;
  Op op = Op::eq;
  double value = 0;

  bool holds(double x) const noexcept {
    switch (op) {
      case Op::eq: return x == value;
      case Op::ne: return x != value;
      case Op::lt: return x < value;
      case Op::le: return x <= value;
      case Op::gt: return x > value;
      case Op::ge: return x >= value;
    }
    return false;
  }

  bool holds(std::span<const double> values) const noexcept { return holds(values[attribute]); }

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Conjunction of predicates. An empty clause is satisfied by everything.
struct Clause {
  std::vector<Predicate> predicates;

  bool empty() const noexcept { return predicates.empty(); }
  std::size_t size() const noexcept { return predicates.size(); }

  bool satisfied_by(std::span<const double> values) const noexcept {
    return std::all_of(predicates.begin(), predicates.end(), [&](const Predicate& p) { return p.holds(values); });
  }

  std::vector<Predicate> on_attribute(std::size_t attribute) const {
    std::vector<Predicate> out;
    for (const auto& p : predicates)
      if (p.attribute == attribute) out.push_back(p);
    return out;
  }

  friend bool operator==(const Clause&, const Clause&) = default;
};

inline Clause conjoin(const Clause& a, const Clause& b) {
  Clause c = a;
  for (const auto& p : b.predicates)
    if (std::find(c.predicates.begin(), c.predicates.end(), p) == c.predicates.end()) c.predicates.push_back(p);
  return c;
}

/// Probability of each class label, indexed like Schema::labels().
class LabelDistribution {
 public:
  static constexpr double kTolerance = 1e-9;

  LabelDistribution() = default;

  explicit LabelDistribution(std::vector<double> probabilities) : p_(std::move(probabilities)) {
    if (p_.size() < 2) throw ValidationError("label distribution needs one entry per class");
    double sum = 0;
    for (double v : p_) {
      if (!(v >= 0) || !std::isfinite(v)) throw ValidationError("label probabilities must be finite and >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kTolerance)
      throw ValidationError("label probabilities sum to " + format_number(sum) + ", expected 1");
  }

  static LabelDistribution delta(LabelId label, std::size_t num_labels) {
    std::vector<double> p(num_labels, 0.0);
    p.at(label) = 1.0;
    return LabelDistribution(std::move(p));
  }

  /// w * a + (1 - w) * b.
  static LabelDistribution mixture(const LabelDistribution& a, const LabelDistribution& b, double w) {
    if (a.size() != b.size()) throw Error("mixing distributions over different label sets");
    if (!(w >= 0 && w <= 1)) throw ValidationError("mixture weight must lie in [0, 1]");
    std::vector<double> p(a.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = w * a.p_[i] + (1 - w) * b.p_[i];
    return LabelDistribution(std::move(p));
  }

  std::size_t size() const noexcept { return p_.size(); }
  double probability(LabelId label) const { return p_.at(label); }
  const std::vector<double>& probabilities() const noexcept { return p_; }

  std::optional<LabelId> deterministic_label() const {
    for (std::size_t i = 0; i < p_.size(); ++i)
      if (p_[i] >= 1.0 - kTolerance) return i;
    return std::nullopt;
  }

  bool in_support(LabelId label) const { return p_.at(label) > 0; }

  friend bool operator==(const LabelDistribution& a, const LabelDistribution& b) {
    if (a.p_.size() != b.p_.size()) return false;
    for (std::size_t i = 0; i < a.p_.size(); ++i)
      if (std::abs(a.p_[i] - b.p_[i]) > kTolerance) return false;
    return true;
  }

 private:
  std::vector<double> p_;
};

/// Draws a label by inverse CDF over the declared label order.
inline LabelId sample_label(const LabelDistribution& dist, Rng& rng) {
  if (auto d = dist.deterministic_label()) return *d;
  const double u = uniform01(rng);
  double acc = 0;
  LabelId last = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist.probability(i) <= 0) continue;
    acc += dist.probability(i);
    last = i;
    if (u < acc) return i;
  }
  return last;
}

/// A clause with carved-out regions: satisfied iff the clause holds and no exclusion does.
struct Term {
  Clause clause;
  std::vector<Clause> exclusions;

  bool satisfied_by(std::span<const double> values) const noexcept {
    if (!clause.satisfied_by(values)) return false;
    return std::none_of(exclusions.begin(), exclusions.end(),
                        [&](const Clause& e) { return e.satisfied_by(values); });
  }

  friend bool operator==(const Term&, const Term&) = default;
};

/// IF clause THEN label ~ distribution. A rule produced by merging same-label
/// overlapping rules carries several terms and is satisfied when any of them is.
struct FeedbackRule {
  std::string id;
  std::vector<Term> terms;
  LabelDistribution distribution;

  FeedbackRule() = default;
  FeedbackRule(std::string rule_id, Clause clause, LabelDistribution dist)
      : id(std::move(rule_id)), terms{Term{std::move(clause), {}}}, distribution(std::move(dist)) {}

  const Clause& clause() const { return terms.front().clause; }
  const std::vector<Clause>& exclusions() const { return terms.front().exclusions; }

  bool satisfied_by(std::span<const double> values) const noexcept {
    return std::any_of(terms.begin(), terms.end(), [&](const Term& t) { return t.satisfied_by(values); });
  }

  /// Index of the first term satisfied by `values`.
  std::optional<std::size_t> satisfied_term(std::span<const double> values) const {
    for (std::size_t t = 0; t < terms.size(); ++t)
      if (terms[t].satisfied_by(values)) return t;
    return std::nullopt;
  }

  bool is_plain() const noexcept { return terms.size() == 1 && terms.front().exclusions.empty(); }
};

class FeedbackRuleSet {
 public:
  explicit FeedbackRuleSet(SchemaPtr schema, std::vector<FeedbackRule> rules = {})
      : schema_(std::move(schema)), rules_(std::move(rules)) {
    if (!schema_) throw Error("rule set requires a schema");
  }

  const Schema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }
  const std::vector<FeedbackRule>& rules() const noexcept { return rules_; }
  std::size_t size() const noexcept { return rules_.size(); }
  bool empty() const noexcept { return rules_.empty(); }
  const FeedbackRule& operator[](std::size_t i) const { return rules_[i]; }
  auto begin() const { return rules_.begin(); }
  auto end() const { return rules_.end(); }

  void add(FeedbackRule rule) { rules_.push_back(std::move(rule)); }

  const FeedbackRule* find(std::string_view id) const {
    for (const auto& r : rules_)
      if (r.id == id) return &r;
    return nullptr;
  }

  /// Index of the first rule covering `values`.
  std::optional<std::size_t> covering_rule(std::span<const double> values) const {
    for (std::size_t r = 0; r < rules_.size(); ++r)
      if (rules_[r].satisfied_by(values)) return r;
    return std::nullopt;
  }

 private:
  SchemaPtr schema_;
  std::vector<FeedbackRule> rules_;
};

inline bool satisfies(const FeedbackRule& rule, const Instance& x) { return rule.satisfied_by(x.values); }

/// Rows whose attributes satisfy the rule. Labels play no part.
inline std::vector<std::size_t> coverage(const FeedbackRule& rule, const Dataset& d) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (rule.satisfied_by(d[i].values)) out.push_back(i);
  return out;
}

inline std::vector<std::size_t> coverage(const Clause& clause, const Dataset& d) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (clause.satisfied_by(d[i].values)) out.push_back(i);
  return out;
}

/// Union of the rules' coverages, ascending.
inline std::vector<std::size_t> coverage(const FeedbackRuleSet& frs, const Dataset& d) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (frs.covering_rule(d[i].values)) out.push_back(i);
  return out;
}

}  // namespace frote
