#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "frote/dataset.hpp"
#include "frote/error.hpp"
#include "frote/metric.hpp"
#include "frote/models.hpp"
#include "frote/relaxation.hpp"
#include "frote/rng.hpp"

namespace frote {

enum class InstanceCategory { safe, borderline, noisy };

inline std::string_view to_string(InstanceCategory c) {
  switch (c) {
    case InstanceCategory::safe: return "safe";
    case InstanceCategory::borderline: return "borderline";
    case InstanceCategory::noisy: return "noisy";
  }
  return "?";
}

inline constexpr double kBorderlineWeight = 3.0;
inline constexpr double kDefaultWeight = 1.0;

struct InstanceWeights {
  std::vector<double> weight;
  std::vector<InstanceCategory> category;

  static InstanceWeights uniform(std::size_t n) {
    return {std::vector<double>(n, kDefaultWeight), std::vector<InstanceCategory>(n, InstanceCategory::safe)};
  }

  std::size_t size() const noexcept { return weight.size(); }
};

/// Classifies a row by q', the number of its k_w nearest neighbours whose
/// predicted label differs from its own.
inline InstanceCategory categorize(std::size_t differing, std::size_t k_w) {
  if (differing == k_w) return InstanceCategory::noisy;
  if (2 * differing >= k_w) return InstanceCategory::borderline;
  return InstanceCategory::safe;
}

/// Borderline weights from the model's predictions over the whole dataset.
inline InstanceWeights compute_weights(const Dataset& d, const Model& model, std::size_t k_w) {
  auto w = InstanceWeights::uniform(d.size());
  if (k_w == 0 || d.size() < k_w + 1) return w;
  const auto pred = model.predict_all(d);
  const auto metric = DistanceMetric::fit(d);
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto nn = nearest_rows(d, all, i, k_w, metric);
    const auto differing =
        static_cast<std::size_t>(std::count_if(nn.begin(), nn.end(), [&](std::size_t j) { return pred[j] != pred[i]; }));
    w.category[i] = categorize(differing, k_w);
    w.weight[i] = w.category[i] == InstanceCategory::borderline ? kBorderlineWeight : kDefaultWeight;
  }
  return w;
}

struct RuleSelection {
  std::size_t bp_index = 0;  // position in the base-population list
  std::string rule_id;
  std::vector<std::size_t> rows;  // ascending; repeats possible under random selection
  std::size_t lower = 0;
  std::size_t upper = 0;
  bool repaired = false;  // bounds adjusted to make the rule's program feasible
};

struct SelectionPlan {
  std::vector<RuleSelection> rules;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& r : rules) n += r.rows.size();
    return n;
  }

  double objective(const InstanceWeights& w) const {
    double s = 0;
    for (const auto& r : rules)
      for (auto i : r.rows) s += w.weight.at(i);
    return s;
  }

  bool repaired() const {
    return std::any_of(rules.begin(), rules.end(), [](const RuleSelection& r) { return r.repaired; });
  }
};

/// Spreads `eta` draws over the non-empty base populations (floor(eta/m) each, the
/// remainder to the first rules) and samples members uniformly with replacement.
inline SelectionPlan select_random(const std::vector<BasePopulation>& bps, std::size_t eta, Rng& rng) {
  if (eta == 0) throw ValidationError("eta must be at least 1");
  std::vector<std::size_t> live;
  for (std::size_t b = 0; b < bps.size(); ++b)
    if (!bps[b].empty()) live.push_back(b);
  SelectionPlan plan;
  if (live.empty()) return plan;
  const std::size_t m = live.size();
  for (std::size_t j = 0; j < m; ++j) {
    const auto& bp = bps[live[j]];
    const std::size_t quota = eta / m + (j < eta % m ? 1 : 0);
    RuleSelection sel{live[j], bp.rule_id, {}, quota, quota, false};
    for (std::size_t t = 0; t < quota; ++t) sel.rows.push_back(bp.members[uniform_index(rng, bp.size())]);
    std::sort(sel.rows.begin(), sel.rows.end());
    plan.rules.push_back(std::move(sel));
  }
  return plan;
}

/// Per-rule bounds of the selection program after feasibility repair.
struct SelectionBounds {
  std::size_t lower = 0;
  std::size_t upper = 0;
  bool repaired = false;
};

inline SelectionBounds ip_bounds(std::size_t bp_size, std::size_t eta, std::size_t rules, std::size_t k) {
  SelectionBounds b;
  b.lower = k + 1;
  b.upper = eta / std::max<std::size_t>(rules, 1);
  if (bp_size < b.lower) {
    b.lower = bp_size;
    b.repaired = true;
  }
  if (b.upper < b.lower) {
    b.upper = b.lower;
    b.repaired = true;
  }
  return b;
}

/// Maximises the total weight of selected members subject to per-rule bounds
/// k+1 <= count <= floor(eta/m). Coverages of a resolved rule set are disjoint,
/// so the program separates by rule and the optimum takes the heaviest members.
inline SelectionPlan select_ip(const std::vector<BasePopulation>& bps, const InstanceWeights& weights,
                               std::size_t eta, std::size_t k) {
  if (eta == 0) throw ValidationError("eta must be at least 1");
  std::size_t m = 0;
  for (const auto& bp : bps) m += bp.empty() ? 0 : 1;
  SelectionPlan plan;
  for (std::size_t b = 0; b < bps.size(); ++b) {
    const auto& bp = bps[b];
    if (bp.empty()) continue;
    const auto bounds = ip_bounds(bp.size(), eta, m, k);
    std::vector<std::size_t> order = bp.members;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      const double wx = weights.weight.at(x), wy = weights.weight.at(y);
      return wx != wy ? wx > wy : x < y;
    });
    const std::size_t take = std::max(bounds.lower, std::min(bounds.upper, order.size()));
    order.resize(std::min(take, order.size()));
    std::sort(order.begin(), order.end());
    plan.rules.push_back({b, bp.rule_id, std::move(order), bounds.lower, bounds.upper, bounds.repaired});
  }
  return plan;
}

}  // namespace frote
