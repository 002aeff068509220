#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "frote/rules.hpp"

namespace frote {

/// Interval over the extended reals with independently open/closed ends.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = true;
  bool hi_open = true;

  bool empty() const noexcept {
    if (lo > hi) return true;
    if (lo == hi) return lo_open || hi_open || std::isinf(lo);
    return false;
  }

  bool contains(double x) const noexcept {
    if (x < lo || (x == lo && lo_open)) return false;
    if (x > hi || (x == hi && hi_open)) return false;
    return true;
  }

  void tighten_lo(double v, bool open) {
    if (v > lo || (v == lo && open)) {
      lo = v;
      lo_open = open;
    }
  }

  void tighten_hi(double v, bool open) {
    if (v < hi || (v == hi && open)) {
      hi = v;
      hi_open = open;
    }
  }

  void apply(Op op, double v) {
    switch (op) {
      case Op::eq:
        tighten_lo(v, false);
        tighten_hi(v, false);
        break;
      case Op::lt: tighten_hi(v, true); break;
      case Op::le: tighten_hi(v, false); break;
      case Op::gt: tighten_lo(v, true); break;
      case Op::ge: tighten_lo(v, false); break;
      case Op::ne: break;  // not legal on numeric attributes
    }
  }

  Interval intersect(const Interval& o) const {
    Interval r = *this;
    r.tighten_lo(o.lo, o.lo_open);
    r.tighten_hi(o.hi, o.hi_open);
    return r;
  }

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Axis-aligned region of the attribute domain: an interval per numeric attribute
/// and an allowed-category mask per categorical attribute.
class Box {
 public:
  explicit Box(const Schema& schema) : intervals_(schema.size()), allowed_(schema.size()) {
    for (std::size_t a = 0; a < schema.size(); ++a)
      if (schema.attribute(a).is_categorical()) allowed_[a].assign(schema.attribute(a).categories.size(), 1);
  }

  static Box of(const Clause& clause, const Schema& schema) {
    Box b(schema);
    for (const auto& p : clause.predicates) b.restrict(p);
    return b;
  }

  bool is_categorical(std::size_t a) const { return !allowed_[a].empty(); }
  const Interval& interval(std::size_t a) const { return intervals_[a]; }
  const std::vector<char>& allowed(std::size_t a) const { return allowed_[a]; }
  std::size_t dimensions() const noexcept { return intervals_.size(); }

  void restrict(const Predicate& p) {
    if (is_categorical(p.attribute)) {
      auto& mask = allowed_[p.attribute];
      const auto c = static_cast<std::size_t>(p.value);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        const bool keep = (p.op == Op::eq) ? (i == c) : (i != c);
        if (!keep) mask[i] = 0;
      }
    } else {
      intervals_[p.attribute].apply(p.op, p.value);
    }
  }

  bool empty() const noexcept {
    for (std::size_t a = 0; a < intervals_.size(); ++a) {
      if (is_categorical(a)) {
        if (std::find(allowed_[a].begin(), allowed_[a].end(), 1) == allowed_[a].end()) return true;
      } else if (intervals_[a].empty()) {
        return true;
      }
    }
    return false;
  }

  bool contains(std::span<const double> values) const {
    for (std::size_t a = 0; a < intervals_.size(); ++a) {
      if (is_categorical(a)) {
        if (!allowed_[a][static_cast<std::size_t>(values[a])]) return false;
      } else if (!intervals_[a].contains(values[a])) {
        return false;
      }
    }
    return true;
  }

  Box intersect(const Box& o) const {
    Box r = *this;
    for (std::size_t a = 0; a < intervals_.size(); ++a) {
      if (is_categorical(a)) {
        for (std::size_t i = 0; i < r.allowed_[a].size(); ++i) r.allowed_[a][i] &= o.allowed_[a][i];
      } else {
        r.intervals_[a] = intervals_[a].intersect(o.intervals_[a]);
      }
    }
    return r;
  }

  /// this \ other as a list of pairwise-disjoint non-empty boxes.
  std::vector<Box> subtract(const Box& other) const {
    if (intersect(other).empty()) return {*this};
    std::vector<Box> pieces;
    Box rest = *this;
    for (std::size_t a = 0; a < intervals_.size(); ++a) {
      if (is_categorical(a)) {
        Box outside = rest;
        for (std::size_t i = 0; i < outside.allowed_[a].size(); ++i) {
          outside.allowed_[a][i] = rest.allowed_[a][i] && !other.allowed_[a][i];
          rest.allowed_[a][i] = rest.allowed_[a][i] && other.allowed_[a][i];
        }
        if (!outside.empty()) pieces.push_back(std::move(outside));
      } else {
        const Interval& cut = other.intervals_[a];
        Box below = rest;
        below.intervals_[a].tighten_hi(cut.lo, !cut.lo_open);
        if (!below.empty()) pieces.push_back(std::move(below));
        Box above = rest;
        above.intervals_[a].tighten_lo(cut.hi, !cut.hi_open);
        if (!above.empty()) pieces.push_back(std::move(above));
        rest.intervals_[a] = rest.intervals_[a].intersect(cut);
      }
    }
    return pieces;
  }

 private:
  std::vector<Interval> intervals_;
  std::vector<std::vector<char>> allowed_;
};

/// A union of disjoint boxes.
using Region = std::vector<Box>;

inline Region region_of(const Term& term, const Schema& schema) {
  Box base = Box::of(term.clause, schema);
  if (base.empty()) return {};
  Region region{base};
  for (const auto& ex : term.exclusions) {
    const Box cut = Box::of(ex, schema);
    Region next;
    for (const auto& b : region)
      for (auto& piece : b.subtract(cut)) next.push_back(std::move(piece));
    region = std::move(next);
    if (region.empty()) break;
  }
  return region;
}

inline Region region_of(const FeedbackRule& rule, const Schema& schema) {
  Region out;
  for (const auto& t : rule.terms)
    for (auto& b : region_of(t, schema)) out.push_back(std::move(b));
  return out;
}

/// True when some point of the domain satisfies both regions.
inline bool regions_intersect(const Region& a, const Region& b) {
  for (const auto& x : a)
    for (const auto& y : b)
      if (!x.intersect(y).empty()) return true;
  return false;
}

/// Exact domain-level test: does any point satisfy both rules? Numeric attributes
/// range over all reals.
inline bool domains_intersect(const FeedbackRule& a, const FeedbackRule& b, const Schema& schema) {
  return regions_intersect(region_of(a, schema), region_of(b, schema));
}

inline bool satisfiable(const Clause& clause, const Schema& schema) { return !Box::of(clause, schema).empty(); }

inline bool satisfiable(const FeedbackRule& rule, const Schema& schema) { return !region_of(rule, schema).empty(); }

}  // namespace frote
