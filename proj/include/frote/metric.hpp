#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "frote/dataset.hpp"

namespace frote {

/// Mixed-type distance: range-normalised numeric differences and a fixed cost per
/// categorical mismatch, combined in a Euclidean norm.
class DistanceMetric {
 public:
  DistanceMetric() = default;

  static DistanceMetric fit(const Dataset& d, double categorical_cost = 1.0) {
    const auto& s = d.schema();
    DistanceMetric m;
    m.cat_cost_ = categorical_cost;
    m.min_.assign(s.size(), 0.0);
    m.max_.assign(s.size(), 0.0);
    m.categorical_.assign(s.size(), 0);
    for (std::size_t a = 0; a < s.size(); ++a) {
      if (s.attribute(a).is_categorical()) {
        m.categorical_[a] = 1;
        continue;
      }
      if (d.empty()) continue;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& r : d.rows()) {
        lo = std::min(lo, r.values[a]);
        hi = std::max(hi, r.values[a]);
      }
      m.min_[a] = lo;
      m.max_[a] = hi;
    }
    return m;
  }

  double min(std::size_t a) const { return min_.at(a); }
  double max(std::size_t a) const { return max_.at(a); }
  double range(std::size_t a) const { return max_.at(a) - min_.at(a); }

  double squared(std::span<const double> x, std::span<const double> y) const {
    double acc = 0;
    for (std::size_t a = 0; a < categorical_.size(); ++a) {
      if (categorical_[a]) {
        if (x[a] != y[a]) acc += cat_cost_ * cat_cost_;
      } else {
        const double r = max_[a] - min_[a];
        if (r > 0) {
          const double t = (x[a] - y[a]) / r;
          acc += t * t;
        }
      }
    }
    return acc;
  }

  double operator()(std::span<const double> x, std::span<const double> y) const { return std::sqrt(squared(x, y)); }

 private:
  std::vector<double> min_, max_;
  std::vector<char> categorical_;
  double cat_cost_ = 1.0;
};

/// The k candidates nearest to row `query` (excluding `query` itself), closest
/// first; equal distances are ordered by row index.
inline std::vector<std::size_t> nearest_rows(const Dataset& d, std::span<const std::size_t> candidates,
                                             std::size_t query, std::size_t k, const DistanceMetric& metric) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates.size());
  const auto& q = d[query].values;
  for (auto c : candidates)
    if (c != query) scored.emplace_back(metric.squared(q, d[c].values), c);
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = scored[i].second;
  return out;
}

}  // namespace frote
