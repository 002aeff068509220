#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "frote/dataset.hpp"
#include "frote/rules.hpp"

namespace frote {

/// Outcome of relaxing one clause.
struct Relaxation {
  Clause clause;                         // the (possibly shortened) clause
  std::vector<std::size_t> members;      // rows covered by `clause`
  bool relaxed = false;
  std::vector<std::size_t> deleted;      // positions in the original clause, ascending
  std::vector<std::size_t> level_support;  // best coverage after 1, 2, ... deletions
};

namespace detail {

/// Row membership bitmap, one bit per dataset row.
class RowBits {
 public:
  explicit RowBits(std::size_t n, bool fill = false) : n_(n), words_((n + 63) / 64, fill ? ~0ULL : 0ULL) {
    trim();
  }

  void set(std::size_t i) { words_[i / 64] |= 1ULL << (i % 64); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1ULL; }

  RowBits& operator&=(const RowBits& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= o.words_[w];
    return *this;
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_; ++i)
      if (test(i)) out.push_back(i);
    return out;
  }

 private:
  void trim() {
    if (n_ % 64 && !words_.empty()) words_.back() &= (1ULL << (n_ % 64)) - 1;
  }

  std::size_t n_;
  std::vector<std::uint64_t> words_;
};

inline std::vector<RowBits> predicate_bits(const Clause& clause, const Dataset& d) {
  std::vector<RowBits> bits;
  for (const auto& p : clause.predicates) {
    RowBits b(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      if (p.holds(d[i].values)) b.set(i);
    bits.push_back(std::move(b));
  }
  return bits;
}

/// Coverage of the clause with the predicates in `kept_mask` only.
inline RowBits kept_bits(const std::vector<RowBits>& bits, std::uint64_t kept_mask, std::size_t rows) {
  RowBits acc(rows, true);
  for (std::size_t c = 0; c < bits.size(); ++c)
    if ((kept_mask >> c) & 1ULL) acc &= bits[c];
  return acc;
}

/// Compares kept sets: true when `a` keeps a lexicographically earlier list of
/// positions than `b`, i.e. the deletion falls on later-listed conditions.
inline bool keeps_earlier(std::uint64_t a, std::uint64_t b, std::size_t n) {
  std::vector<std::size_t> ka, kb;
  for (std::size_t c = 0; c < n; ++c) {
    if ((a >> c) & 1ULL) ka.push_back(c);
    if ((b >> c) & 1ULL) kb.push_back(c);
  }
  return ka < kb;
}

}  // namespace detail

/// Clauses up to this length are relaxed by exhaustive level search; longer ones greedily.
inline constexpr std::size_t kExhaustiveRelaxLimit = 16;

/// Finds the maximal partial clause: the fewest deleted conditions whose remaining
/// clause covers at least `min_support` rows (capped at |d|), taking the largest
/// coverage among subsets of that size. Ties keep earlier-listed conditions. Deleting
/// every condition leaves the empty clause, which covers all rows.
inline Relaxation relax_clause(const Clause& clause, const Dataset& d, std::size_t min_support) {
  const std::size_t n = clause.size();
  const std::size_t rows = d.size();
  const std::size_t need = std::min(min_support, rows);
  const auto bits = detail::predicate_bits(clause, d);
  const std::uint64_t full = n >= 64 ? ~0ULL : ((1ULL << n) - 1);

  Relaxation out;
  auto base = detail::kept_bits(bits, full, rows);
  if (base.count() >= need) {
    out.clause = clause;
    out.members = base.indices();
    return out;
  }
  out.relaxed = true;

  std::uint64_t kept = full;
  if (n <= kExhaustiveRelaxLimit) {
    for (std::size_t level = 1; level <= n; ++level) {
      std::uint64_t best_mask = 0;
      std::size_t best = 0;
      bool have = false;
      for (std::uint64_t mask = 0; mask <= full; ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != n - level) continue;
        const auto cov = mask == 0 ? rows : detail::kept_bits(bits, mask, rows).count();
        if (!have || cov > best || (cov == best && detail::keeps_earlier(mask, best_mask, n))) {
          best = cov;
          best_mask = mask;
          have = true;
        }
      }
      out.level_support.push_back(best);
      kept = best_mask;
      if (best >= need) break;
    }
  } else {
    while (true) {
      std::uint64_t best_mask = 0;
      std::size_t best = 0;
      bool have = false;
      for (std::size_t c = 0; c < n; ++c) {
        if (!((kept >> c) & 1ULL)) continue;
        const std::uint64_t mask = kept & ~(1ULL << c);
        const auto cov = mask == 0 ? rows : detail::kept_bits(bits, mask, rows).count();
        if (!have || cov >= best) {  // >= : on ties the later-listed condition goes
          best = cov;
          best_mask = mask;
          have = true;
        }
      }
      out.level_support.push_back(best);
      kept = best_mask;
      if (best >= need || kept == 0) break;
    }
  }

  for (std::size_t c = 0; c < n; ++c) {
    if ((kept >> c) & 1ULL)
      out.clause.predicates.push_back(clause.predicates[c]);
    else
      out.deleted.push_back(c);
  }
  out.members = kept == 0 ? detail::RowBits(rows, true).indices() : detail::kept_bits(bits, kept, rows).indices();
  return out;
}

struct BasePopulation {
  std::string rule_id;
  std::size_t rule_index = 0;
  std::size_t term = 0;         // term whose clause was relaxed (when relaxed)
  Clause relaxed_clause;        // empty with relaxed == true means "all rows"
  std::vector<std::size_t> members;
  bool relaxed = false;

  bool empty() const noexcept { return members.empty(); }
  std::size_t size() const noexcept { return members.size(); }
};

/// Base population of one rule: its coverage when that reaches `min_support`,
/// otherwise the coverage of the best relaxed term.
inline BasePopulation relax_rule(const FeedbackRule& rule, std::size_t rule_index, const Dataset& d,
                                 std::size_t min_support) {
  BasePopulation bp;
  bp.rule_id = rule.id;
  bp.rule_index = rule_index;
  auto cov = coverage(rule, d);
  if (cov.size() >= std::min(min_support, d.size())) {
    bp.members = std::move(cov);
    bp.relaxed_clause = rule.clause();
    return bp;
  }
  std::optional<Relaxation> best;
  for (std::size_t t = 0; t < rule.terms.size(); ++t) {
    auto r = relax_clause(rule.terms[t].clause, d, min_support);
    const bool better = !best || r.deleted.size() < best->deleted.size() ||
                        (r.deleted.size() == best->deleted.size() && r.members.size() > best->members.size());
    if (better) {
      best = std::move(r);
      bp.term = t;
    }
  }
  bp.relaxed = true;
  bp.relaxed_clause = std::move(best->clause);
  bp.members = std::move(best->members);
  return bp;
}

/// One base population per rule with minimum support k + 1.
inline std::vector<BasePopulation> pre_select_bp(const Dataset& d, const FeedbackRuleSet& frs, std::size_t k) {
  std::vector<BasePopulation> out;
  out.reserve(frs.size());
  for (std::size_t r = 0; r < frs.size(); ++r) out.push_back(relax_rule(frs[r], r, d, k + 1));
  return out;
}

}  // namespace frote
