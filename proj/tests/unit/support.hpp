#pragma once

#include <memory>
#include <string>
#include <vector>

#include "frote/frote.hpp"

namespace testing {

// Two integer-valued numeric attributes around one categorical; three classes.
inline frote::SchemaPtr mixed_schema() {
  using frote::Attribute;
  using frote::AttributeKind;
  return std::make_shared<const frote::Schema>(
      std::vector<Attribute>{{"a", AttributeKind::numeric, {}},
                             {"c", AttributeKind::categorical, {"x", "y", "z"}},
                             {"b", AttributeKind::numeric, {}}},
      "label", std::vector<std::string>{"l0", "l1", "l2"});
}

inline frote::Dataset random_dataset(frote::SchemaPtr schema, std::size_t n, frote::Rng& rng, std::size_t span = 5) {
  frote::Dataset d(schema);
  for (std::size_t i = 0; i < n; ++i) {
    frote::Instance x;
    for (std::size_t a = 0; a < schema->size(); ++a) {
      const auto& attr = schema->attribute(a);
      x.values.push_back(static_cast<double>(
          frote::uniform_index(rng, attr.is_numeric() ? span : attr.categories.size())));
    }
    x.label = frote::uniform_index(rng, schema->num_labels());
    d.add(std::move(x));
  }
  return d;
}

inline frote::Predicate random_predicate(const frote::Schema& s, frote::Rng& rng, std::size_t span = 5) {
  const std::size_t a = frote::uniform_index(rng, s.size());
  if (s.attribute(a).is_categorical())
    return {a, frote::uniform_index(rng, 2) ? frote::Op::eq : frote::Op::ne,
            static_cast<double>(frote::uniform_index(rng, s.attribute(a).categories.size()))};
  const frote::Op ops[] = {frote::Op::lt, frote::Op::le, frote::Op::gt, frote::Op::ge, frote::Op::eq};
  return {a, ops[frote::uniform_index(rng, 5)], static_cast<double>(frote::uniform_index(rng, span))};
}

inline frote::Clause random_clause(const frote::Schema& s, frote::Rng& rng, std::size_t max_conditions = 3) {
  frote::Clause c;
  const std::size_t n = 1 + frote::uniform_index(rng, max_conditions);
  for (std::size_t i = 0; i < n; ++i) c.predicates.push_back(random_predicate(s, rng));
  return c;
}

// Every point of a grid that separates all integer thresholds in [0, span).
inline std::vector<std::vector<double>> grid(const frote::Schema& s, std::size_t span = 5) {
  std::vector<std::vector<double>> out{{}};
  for (std::size_t a = 0; a < s.size(); ++a) {
    std::vector<double> axis;
    if (s.attribute(a).is_numeric()) {
      for (double v = -0.5; v <= static_cast<double>(span) - 0.5; v += 0.5) axis.push_back(v);
    } else {
      for (std::size_t c = 0; c < s.attribute(a).categories.size(); ++c) axis.push_back(static_cast<double>(c));
    }
    std::vector<std::vector<double>> next;
    for (const auto& p : out)
      for (double v : axis) {
        next.push_back(p);
        next.back().push_back(v);
      }
    out = std::move(next);
  }
  return out;
}

}  // namespace testing
