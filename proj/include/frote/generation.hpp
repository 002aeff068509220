#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "frote/dataset.hpp"
#include "frote/domain.hpp"
#include "frote/error.hpp"
#include "frote/metric.hpp"
#include "frote/relaxation.hpp"
#include "frote/rng.hpp"
#include "frote/rules.hpp"
#include "frote/selection.hpp"

namespace frote {

/// The k members of `bp` nearest to `base`, excluding `base`; ties by row index.
inline std::vector<std::size_t> neighbors_in_rule(const Dataset& d, const BasePopulation& bp, std::size_t base,
                                                  std::size_t k, const DistanceMetric& metric) {
  if (bp.size() < k + 1)
    throw Error("base population of rule '" + bp.rule_id + "' has " + std::to_string(bp.size()) +
                " members, need " + std::to_string(k + 1));
  return nearest_rows(d, bp.members, base, k, metric);
}

/// Numeric attribute bounds used when sampling: the dataset range and the
/// strict-bound inset derived from it.
struct NumericScale {
  double min = 0;
  double max = 0;

  double range() const { return max - min; }
  double epsilon() const { return std::max(1e-9 * range(), 1e-12); }
};

namespace detail {

inline double inset_up(double v, double eps) {
  const double r = v + eps;
  return r > v ? r : std::nextafter(v, std::numeric_limits<double>::infinity());
}

inline double inset_down(double v, double eps) {
  const double r = v - eps;
  return r < v ? r : std::nextafter(v, -std::numeric_limits<double>::infinity());
}

/// Closed interval realising `w`: strict ends are pulled inwards, infinite ends
/// are replaced by a span of the attribute range beyond the finite end.
inline std::pair<double, double> realize(const Interval& w, const NumericScale& scale) {
  const double eps = scale.epsilon();
  const double span = scale.range() > 0 ? scale.range() : 1.0;
  double lo = w.lo, hi = w.hi;
  if (std::isinf(lo) && std::isinf(hi)) {
    lo = scale.min;
    hi = scale.max;
  } else if (std::isinf(lo)) {
    lo = std::min(scale.min, hi - span);
  } else if (std::isinf(hi)) {
    hi = std::max(scale.max, lo + span);
  }
  if (w.lo_open && !std::isinf(w.lo)) lo = inset_up(lo, eps);
  if (w.hi_open && !std::isinf(w.hi)) hi = inset_down(hi, eps);
  if (lo > hi) lo = hi = w.lo + (w.hi - w.lo) / 2;
  return {lo, hi};
}

inline double uniform_in(double lo, double hi, Rng& rng) {
  if (lo >= hi) return lo;
  return std::min(hi, lo + uniform01(rng) * (hi - lo));
}

}  // namespace detail

/// Interpolates between base and neighbour inside the conditions' window. An
/// equality condition fixes the value. When the segment misses the window the
/// window alone (bounded by the dataset range where open-ended) is sampled.
inline double synthesize_numeric(double base_v, double nbr_v, std::span<const Predicate> conditions,
                                 const NumericScale& scale, Rng& rng) {
  Interval window;
  for (const auto& p : conditions) {
    if (p.op == Op::eq) return p.value;
    if (p.op == Op::ne) throw Error("'!=' condition on a numeric attribute");
    window.apply(p.op, p.value);
  }
  if (window.empty()) throw Error("numeric conditions are unsatisfiable");
  Interval segment{std::min(base_v, nbr_v), std::max(base_v, nbr_v), false, false};
  Interval w = segment.intersect(window);
  if (w.empty()) {
    w = window;
    // Prefer the part of the window inside the observed range when there is one.
    Interval observed{scale.min, scale.max, false, false};
    const Interval clipped = window.intersect(observed);
    if (!clipped.empty()) w = clipped;
  }
  const auto [lo, hi] = detail::realize(w, scale);
  return detail::uniform_in(lo, hi, rng);
}

/// Neighbour categories by descending frequency (ties to the lower category
/// index); the first that satisfies every condition wins, else the first
/// satisfying category in schema order.
inline std::size_t synthesize_categorical(std::span<const std::size_t> nbr_values, std::span<const Predicate> conditions,
                                          std::size_t num_categories) {
  auto ok = [&](std::size_t c) {
    return std::all_of(conditions.begin(), conditions.end(),
                       [&](const Predicate& p) { return p.holds(static_cast<double>(c)); });
  };
  std::vector<std::size_t> freq(num_categories, 0);
  for (auto v : nbr_values) ++freq.at(v);
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < num_categories; ++c)
    if (freq[c] > 0) order.push_back(c);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return freq[a] > freq[b]; });
  for (auto c : order)
    if (ok(c)) return c;
  for (std::size_t c = 0; c < num_categories; ++c)
    if (ok(c)) return c;
  throw Error("no category satisfies the conditions");
}

struct SyntheticInstance {
  Instance instance;
  Provenance provenance;
};

struct GenerationResult {
  std::vector<SyntheticInstance> instances;
  std::size_t rejected = 0;  // bases whose every attempt fell inside an exclusion
};

inline constexpr std::size_t kGenerationAttempts = 32;

/// One synthetic instance per selected base. Base number `ordinal` (plan order)
/// draws from its own stream derived from (seed, ordinal). Attribute values obey
/// the original conditions of the term the base population came from; the label
/// is sampled from the rule's distribution.
inline GenerationResult generate(const Dataset& d, const FeedbackRuleSet& frs, const std::vector<BasePopulation>& bps,
                                 const SelectionPlan& plan, std::size_t k, const DistanceMetric& metric,
                                 std::uint64_t seed) {
  const auto& schema = d.schema();
  std::vector<NumericScale> scales(schema.size());
  for (std::size_t a = 0; a < schema.size(); ++a)
    if (schema.attribute(a).is_numeric()) scales[a] = {metric.min(a), metric.max(a)};

  GenerationResult out;
  std::uint64_t ordinal = 0;
  for (const auto& sel : plan.rules) {
    const auto& bp = bps.at(sel.bp_index);
    const auto& rule = frs[bp.rule_index];
    const auto& term = rule.terms.at(bp.term);
    std::vector<std::vector<Predicate>> conditions(schema.size());
    for (std::size_t a = 0; a < schema.size(); ++a) conditions[a] = term.clause.on_attribute(a);
    const std::size_t k_eff = std::min(k, bp.size() > 0 ? bp.size() - 1 : 0);

    for (auto base : sel.rows) {
      Rng rng = make_rng(seed, "generate", ordinal++);
      const auto nn = nearest_rows(d, bp.members, base, k_eff, metric);
      std::vector<std::size_t> nbr_cats;
      bool done = false;
      for (std::size_t attempt = 0; attempt < kGenerationAttempts && !done; ++attempt) {
        const std::size_t nbr = nn.empty() ? base : nn[uniform_index(rng, nn.size())];
        Instance x;
        x.values.resize(schema.size());
        for (std::size_t a = 0; a < schema.size(); ++a) {
          const auto& attr = schema.attribute(a);
          if (attr.is_numeric()) {
            x.values[a] = synthesize_numeric(d[base].values[a], d[nbr].values[a], conditions[a], scales[a], rng);
          } else {
            nbr_cats.clear();
            for (auto j : nn) nbr_cats.push_back(static_cast<std::size_t>(d[j].values[a]));
            if (nn.empty()) nbr_cats.push_back(static_cast<std::size_t>(d[base].values[a]));
            x.values[a] = static_cast<double>(synthesize_categorical(nbr_cats, conditions[a], attr.categories.size()));
          }
        }
        if (!term.satisfied_by(x.values)) continue;
        x.label = sample_label(rule.distribution, rng);
        out.instances.push_back({std::move(x), Provenance::synthetic(rule.id, base, nbr)});
        done = true;
      }
      if (!done) ++out.rejected;
    }
  }
  return out;
}

}  // namespace frote
