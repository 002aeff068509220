#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "frote/dataset.hpp"
#include "frote/rng.hpp"
#include "frote/rules.hpp"

namespace frote {

/// Pre-treats rows covered by the (conflict-free) rule set.
///   none    - identity.
///   relabel - a covered row takes its rule's class; under a probabilistic rule the
///             new label is drawn from the rule's distribution (needs `rng`).
///   drop    - covered rows that disagree with their rule are removed. For a
///             probabilistic rule a row disagrees when its label is outside the support.
inline Dataset apply_modification(const Dataset& d, const FeedbackRuleSet& frs, ModificationStrategy strategy,
                                  Rng* rng = nullptr) {
  if (strategy == ModificationStrategy::none) return d;
  if (strategy == ModificationStrategy::relabel && !rng) {
    for (const auto& r : frs)
      if (!r.distribution.deterministic_label())
        throw Error("relabelling under probabilistic rule '" + r.id + "' requires a random generator");
  }

  Dataset out(d.schema_ptr());
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    Instance row = d[i];
    const auto r = frs.covering_rule(row.values);
    if (r) {
      const auto& dist = frs[*r].distribution;
      const auto det = dist.deterministic_label();
      if (strategy == ModificationStrategy::relabel) {
        if (det)
          row.label = *det;
        else
          row.label = sample_label(dist, *rng);
      } else {  // drop
        const bool disagrees = det ? row.label != *det : !dist.in_support(row.label);
        if (disagrees) continue;
      }
    }
    out.add(std::move(row), d.provenance(i));
  }
  return out;
}

/// floor(x + 1/2) with a small guard so products like 0.15 * 10 round as written.
inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9)); }

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // indices into the source dataset, ascending
  std::vector<std::size_t> test_rows;
};

/// Splits so that round(tcf * |cov|) covered rows land in train and outside-coverage
/// rows are split by `outside_train_frac`. Both parts keep source order.
inline TrainTestSplit split_with_tcf(const Dataset& d, const FeedbackRuleSet& frs, double tcf,
                                     double outside_train_frac, Rng& rng) {
  if (!(tcf >= 0 && tcf <= 1)) throw ValidationError("tcf must lie in [0, 1]");
  if (!(outside_train_frac >= 0 && outside_train_frac <= 1))
    throw ValidationError("outside train fraction must lie in [0, 1]");
  std::vector<std::size_t> covered, outside;
  for (std::size_t i = 0; i < d.size(); ++i) (frs.covering_rule(d[i].values) ? covered : outside).push_back(i);

  std::vector<std::size_t> train, test;
  auto take = [&](std::vector<std::size_t>& rows, double frac) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n = std::min(rows.size(), round_half_up(frac * static_cast<double>(rows.size())));
    train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n));
    test.insert(test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n), rows.end());
  };
  take(covered, tcf);
  take(outside, outside_train_frac);
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {d.subset(train), d.subset(test), std::move(train), std::move(test)};
}

}  // namespace frote
