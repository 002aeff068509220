#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "frote/dataset.hpp"
#include "frote/models.hpp"
#include "frote/rules.hpp"

namespace frote {

struct RuleAgreement {
  std::string rule_id;
  std::size_t covered = 0;
  std::optional<double> mra;  // empty when the rule covers no row
};

struct MraResult {
  std::vector<RuleAgreement> rules;
  std::optional<double> aggregate;  // coverage-weighted over rules with coverage
  std::size_t covered = 0;          // sum of per-rule coverage
};

/// Expected agreement pi_r(prediction) over each rule's coverage; for a
/// deterministic rule this is the plain fraction of rows predicted as its class.
inline MraResult mra(std::span<const LabelId> predictions, const FeedbackRuleSet& frs, const Dataset& d) {
  MraResult out;
  double weighted = 0;
  for (const auto& rule : frs) {
    RuleAgreement ra{rule.id, 0, std::nullopt};
    double agree = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!rule.satisfied_by(d[i].values)) continue;
      ++ra.covered;
      agree += rule.distribution.probability(predictions[i]);
    }
    if (ra.covered > 0) {
      ra.mra = agree / static_cast<double>(ra.covered);
      weighted += agree;
      out.covered += ra.covered;
    }
    out.rules.push_back(std::move(ra));
  }
  if (out.covered > 0) out.aggregate = weighted / static_cast<double>(out.covered);
  return out;
}

inline MraResult mra(const Model& m, const FeedbackRuleSet& frs, const Dataset& d) {
  return mra(m.predict_all(d), frs, d);
}

/// Binary: F1 of label index 1. Otherwise macro F1 over labels occurring in
/// either truth or predictions. Zero denominators score 0.
inline double f1_score(std::span<const LabelId> truth, std::span<const LabelId> pred, std::size_t num_labels) {
  std::vector<double> tp(num_labels, 0), fp(num_labels, 0), fn(num_labels, 0);
  std::vector<char> seen(num_labels, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    seen[truth[i]] = seen[pred[i]] = 1;
    if (truth[i] == pred[i]) {
      tp[truth[i]] += 1;
    } else {
      fp[pred[i]] += 1;
      fn[truth[i]] += 1;
    }
  }
  auto f1 = [&](std::size_t c) {
    const double den = 2 * tp[c] + fp[c] + fn[c];
    return den > 0 ? 2 * tp[c] / den : 0.0;
  };
  if (num_labels == 2) return f1(1);
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < num_labels; ++c) {
    if (!seen[c]) continue;
    sum += f1(c);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

struct OutsideF1 {
  std::optional<double> f1;  // empty when no row lies outside the rules' coverage
  std::size_t outside = 0;
};

inline OutsideF1 outside_f1(std::span<const LabelId> predictions, const FeedbackRuleSet& frs, const Dataset& d) {
  std::vector<LabelId> truth, pred;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (frs.covering_rule(d[i].values)) continue;
    truth.push_back(d[i].label);
    pred.push_back(predictions[i]);
  }
  OutsideF1 out;
  out.outside = truth.size();
  if (!truth.empty()) out.f1 = f1_score(truth, pred, d.schema().num_labels());
  return out;
}

inline OutsideF1 outside_f1(const Model& m, const FeedbackRuleSet& frs, const Dataset& d) {
  return outside_f1(m.predict_all(d), frs, d);
}

enum class Weighting { train, coverage };

struct ObjectiveReport {
  MraResult agreement;
  OutsideF1 outside;
  std::size_t rows = 0;
  Weighting weighting = Weighting::train;
  double mra_weight = 0;
  double f1_weight = 0;
  double value = 0;  // j_train (lower is better) or J-bar (higher is better)

  double mra_or(double fallback) const { return agreement.aggregate.value_or(fallback); }
  double f1_or(double fallback) const { return outside.f1.value_or(fallback); }

  nlohmann::json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : agreement.rules)
      rules.push_back({{"rule", r.rule_id}, {"covered", r.covered}, {"mra", opt(r.mra)}});
    return {{"weighting", weighting == Weighting::train ? "train" : "coverage"},
            {"rows", rows},
            {"covered", agreement.covered},
            {"outside", outside.outside},
            {"mra", opt(agreement.aggregate)},
            {"outside_f1", opt(outside.f1)},
            {"mra_weight", mra_weight},
            {"f1_weight", f1_weight},
            {"value", value},
            {"rules", rules}};
  }
};

/// 0.5 (1 - MRA) + 0.5 (1 - F1) on `d`. An undefined term is dropped and the
/// other carries full weight; with neither defined the value is 0.
inline ObjectiveReport j_train_report(std::span<const LabelId> predictions, const FeedbackRuleSet& frs,
                                      const Dataset& d) {
  ObjectiveReport r;
  r.weighting = Weighting::train;
  r.rows = d.size();
  r.agreement = mra(predictions, frs, d);
  r.outside = outside_f1(predictions, frs, d);
  const bool hm = r.agreement.aggregate.has_value(), hf = r.outside.f1.has_value();
  r.mra_weight = hm ? (hf ? 0.5 : 1.0) : 0.0;
  r.f1_weight = hf ? (hm ? 0.5 : 1.0) : 0.0;
  r.value = r.mra_weight * (1 - r.mra_or(0)) + r.f1_weight * (1 - r.f1_or(0));
  return r;
}

inline ObjectiveReport j_train_report(const Model& m, const FeedbackRuleSet& frs, const Dataset& d) {
  return j_train_report(m.predict_all(d), frs, d);
}

inline double j_train(const Model& m, const FeedbackRuleSet& frs, const Dataset& d) {
  return j_train_report(m, frs, d).value;
}

/// Sum over rules of (|cov_r| / |test|) MRA_r plus (|outside| / |test|) F1.
inline ObjectiveReport j_bar_report(std::span<const LabelId> predictions, const FeedbackRuleSet& frs,
                                    const Dataset& test) {
  if (test.empty()) throw ValidationError("test set is empty");
  ObjectiveReport r;
  r.weighting = Weighting::coverage;
  r.rows = test.size();
  r.agreement = mra(predictions, frs, test);
  r.outside = outside_f1(predictions, frs, test);
  const double n = static_cast<double>(test.size());
  r.mra_weight = static_cast<double>(r.agreement.covered) / n;
  r.f1_weight = static_cast<double>(r.outside.outside) / n;
  r.value = r.mra_weight * r.mra_or(0) + r.f1_weight * r.f1_or(0);
  return r;
}

inline ObjectiveReport j_bar_report(const Model& m, const FeedbackRuleSet& frs, const Dataset& test) {
  return j_bar_report(m.predict_all(test), frs, test);
}

inline double j_bar_test(const Model& m, const FeedbackRuleSet& frs, const Dataset& test) {
  return j_bar_report(m, frs, test).value;
}

}  // namespace frote
