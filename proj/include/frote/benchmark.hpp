#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>

#include "frote/dataset.hpp"
#include "frote/rng.hpp"
#include "frote/rule_parser.hpp"
#include "frote/rules.hpp"

namespace frote::benchmark {

/// Two isotropic Gaussian blobs in the plane, one per class.
struct BlobsSpec {
  std::size_t per_class = 300;
  double sigma = 1.0;
  double neg_x = 0.0, neg_y = 0.0;
  double pos_x = 3.0, pos_y = 3.0;
  std::uint64_t seed = 7;
};

inline SchemaPtr blobs_schema() {
  return std::make_shared<const Schema>(
      std::vector<Attribute>{{"x1", AttributeKind::numeric, {}}, {"x2", AttributeKind::numeric, {}}}, "class",
      std::vector<std::string>{"neg", "pos"});
}

/// Rows alternate neg/pos so any prefix is balanced.
inline Dataset make_blobs(const BlobsSpec& spec, SchemaPtr schema = blobs_schema()) {
  Dataset d(std::move(schema));
  Rng rng = make_rng(spec.seed, "blobs");
  std::normal_distribution<double> noise(0.0, spec.sigma);
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    const double a = noise(rng), b = noise(rng);
    d.add({{spec.neg_x + a, spec.neg_y + b}, 0});
    const double c = noise(rng), e = noise(rng);
    d.add({{spec.pos_x + c, spec.pos_y + e}, 1});
  }
  return d;
}

/// Claims the quarter-plane right of x1 = 1.5 and below x2 = 1 for the positive
/// class; most of it lies on the negative side of the unedited boundary.
inline constexpr const char* kBlobsRule = "IF x1 > 1.5 AND x2 < 1 THEN class = pos\n";

inline FeedbackRuleSet blobs_rules(SchemaPtr schema = blobs_schema()) { return parse_rule_set(kBlobsRule, std::move(schema)); }

}  // namespace frote::benchmark
