#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "frote/dataset.hpp"
#include "frote/error.hpp"
#include "frote/generation.hpp"
#include "frote/metric.hpp"
#include "frote/models.hpp"
#include "frote/modification.hpp"
#include "frote/objective.hpp"
#include "frote/relaxation.hpp"
#include "frote/rng.hpp"
#include "frote/rules.hpp"
#include "frote/selection.hpp"

namespace frote {

enum class Selector { random, ip };

inline std::string_view to_string(Selector s) { return s == Selector::ip ? "ip" : "random"; }

inline Selector parse_selector(std::string_view s) {
  if (s == "random") return Selector::random;
  if (s == "ip") return Selector::ip;
  throw ValidationError("unknown selector '" + std::string(s) + "'");
}

struct FroteConfig {
  std::size_t tau = 200;
  double q = 0.5;
  std::size_t k = 5;
  std::optional<std::size_t> eta_override;
  Selector selector = Selector::random;
  ModificationStrategy strategy = ModificationStrategy::relabel;
  std::uint64_t seed = 0;
  std::size_t weight_neighbors = 10;  // k_w for borderline weights

  void validate() const {
    if (tau < 1) throw ValidationError("tau must be at least 1");
    if (!(q > 0) || !std::isfinite(q)) throw ValidationError("q must be positive");
    if (k < 1) throw ValidationError("k must be at least 1");
    if (eta_override && *eta_override < 1) throw ValidationError("eta must be at least 1");
  }

  /// ceil(q |D| / tau), at least 1, unless overridden.
  std::size_t eta(std::size_t rows) const {
    if (eta_override) return *eta_override;
    const double raw = q * static_cast<double>(rows) / static_cast<double>(tau);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-12)));
  }

  double quota(std::size_t rows) const { return q * static_cast<double>(rows); }

  nlohmann::json to_json() const {
    return {{"tau", tau},
            {"q", q},
            {"k", k},
            {"eta", eta_override ? nlohmann::json(*eta_override) : nlohmann::json(nullptr)},
            {"selector", std::string(to_string(selector))},
            {"strategy", std::string(to_string(strategy))},
            {"seed", seed},
            {"weight_neighbors", weight_neighbors}};
  }
};

struct IterationTrace {
  std::size_t iteration = 0;
  std::size_t n_before = 0;  // N at the loop-entry check
  std::size_t selected = 0;
  std::size_t generated = 0;
  std::size_t rejected = 0;  // bases that produced no instance
  bool accepted = false;
  double j_before = 0;
  double j_after = 0;
  std::size_t n_after = 0;
  bool scored_on_candidate = false;  // no covered row in the active set, so D' was the scoring set

  nlohmann::json to_json() const {
    return {{"iteration", iteration}, {"n_before", n_before}, {"selected", selected},
            {"generated", generated}, {"rejected", rejected},  {"accepted", accepted},
            {"j_before", j_before},   {"j_after", j_after},    {"n_after", n_after},
            {"scored_on_candidate", scored_on_candidate}};
  }
};

enum class StopReason { iteration_limit, quota, empty_base_populations };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::iteration_limit: return "iteration_limit";
    case StopReason::quota: return "quota";
    case StopReason::empty_base_populations: return "empty_base_populations";
  }
  return "?";
}

struct AugmentationResult {
  Dataset dataset;  // final active dataset
  Model initial_model;
  Model modified_model;
  Model model;
  std::vector<IterationTrace> trace;
  ObjectiveReport initial;   // initial model on the modified dataset
  ObjectiveReport modified;  // modified model on the modified dataset
  ObjectiveReport final;     // final model on the modified dataset
  std::size_t input_rows = 0;
  std::size_t modified_rows = 0;
  std::size_t eta = 0;
  double quota = 0;
  std::size_t instances_added = 0;
  StopReason stop = StopReason::iteration_limit;

  std::size_t accepted_iterations() const {
    return static_cast<std::size_t>(
        std::count_if(trace.begin(), trace.end(), [](const IterationTrace& t) { return t.accepted; }));
  }

  nlohmann::json to_json() const {
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& t : trace) tr.push_back(t.to_json());
    return {{"input_rows", input_rows},
            {"modified_rows", modified_rows},
            {"final_rows", dataset.size()},
            {"eta", eta},
            {"quota", quota},
            {"iterations", trace.size()},
            {"accepted_iterations", accepted_iterations()},
            {"instances_added", instances_added},
            {"stop_reason", std::string(to_string(stop))},
            {"objective", {{"initial", initial.to_json()}, {"mod", modified.to_json()}, {"final", final.to_json()}}},
            {"trace", tr}};
  }
};

/// Optional observers; called synchronously from the loop.
struct FroteHooks {
  std::function<void(const IterationTrace&, const GenerationResult&)> on_iteration;
};

/// The accept/reject augmentation loop. `d` is the training data before the
/// modification strategy is applied; `frs` must be conflict-free.
inline AugmentationResult run_frote(const FroteConfig& cfg, const Dataset& d, const FeedbackRuleSet& frs,
                                    const Trainer& trainer, const FroteHooks& hooks = {}) {
  cfg.validate();
  if (d.empty()) throw ValidationError("training dataset is empty");
  if (!(frs.schema() == d.schema())) throw ValidationError("rule set and dataset use different schemas");

  auto fit = [&](const Dataset& data, std::size_t slot) {
    try {
      return trainer(data, derive_seed(cfg.seed, "train", slot));
    } catch (const std::exception& e) {
      throw Error("training failed at iteration " + std::to_string(slot) + ": " + e.what());
    }
  };

  const std::size_t input_rows = d.size();
  Model initial_model = fit(d, 0);

  Rng label_rng = make_rng(cfg.seed, "modify");
  Dataset active = apply_modification(d, frs, cfg.strategy, &label_rng);
  if (active.empty()) throw ValidationError("modification strategy removed every training row");
  Model model = cfg.strategy == ModificationStrategy::none ? initial_model : fit(active, 0);
  Model modified_model = model;

  const std::size_t eta = cfg.eta(input_rows);
  const double quota = cfg.quota(input_rows);

  auto has_coverage = [&](const Dataset& data) {
    for (const auto& r : data.rows())
      if (frs.covering_rule(r.values)) return true;
    return false;
  };

  double j_hat = j_train(model, frs, active);
  auto bps = pre_select_bp(active, frs, cfg.k);
  auto metric = DistanceMetric::fit(active);
  std::optional<InstanceWeights> weights;
  if (cfg.selector == Selector::ip) weights = compute_weights(active, model, cfg.weight_neighbors);

  AugmentationResult res{active, initial_model, modified_model, model, {}, {}, {}, {}};
  res.input_rows = input_rows;
  res.modified_rows = active.size();
  res.eta = eta;
  res.quota = quota;

  std::size_t n = 0;
  std::size_t i = 0;
  while (true) {
    if (i >= cfg.tau) {
      res.stop = StopReason::iteration_limit;
      break;
    }
    if (static_cast<double>(n) > quota) {
      res.stop = StopReason::quota;
      break;
    }
    if (std::all_of(bps.begin(), bps.end(), [](const BasePopulation& b) { return b.empty(); })) {
      res.stop = StopReason::empty_base_populations;
      break;
    }

    IterationTrace t;
    t.iteration = i;
    t.n_before = n;

    SelectionPlan plan;
    if (cfg.selector == Selector::ip) {
      plan = select_ip(bps, *weights, eta, cfg.k);
    } else {
      Rng sel_rng = make_rng(cfg.seed, "select", i);
      plan = select_random(bps, eta, sel_rng);
    }
    t.selected = plan.total();
    auto gen = generate(active, frs, bps, plan, cfg.k, metric, derive_seed(cfg.seed, "generate", i));
    t.generated = gen.instances.size();
    t.rejected = gen.rejected;

    if (!gen.instances.empty()) {
      Dataset candidate = active;
      candidate.reserve(active.size() + gen.instances.size());
      for (const auto& s : gen.instances) candidate.add(s.instance, s.provenance);
      Model cand_model = fit(candidate, i + 1);

      // With no covered row in the active set the agreement term is undefined
      // for both models, so both are scored on the candidate set instead.
      double j_before = j_hat, j_after = 0;
      if (has_coverage(active)) {
        j_after = j_train(cand_model, frs, active);
      } else {
        t.scored_on_candidate = true;
        j_before = j_train(model, frs, candidate);
        j_after = j_train(cand_model, frs, candidate);
      }
      t.j_before = j_before;
      t.j_after = j_after;
      if (j_after < j_before) {
        t.accepted = true;
        active = std::move(candidate);
        model = std::move(cand_model);
        n += gen.instances.size();
        j_hat = j_after;
        bps = pre_select_bp(active, frs, cfg.k);
        metric = DistanceMetric::fit(active);
        if (cfg.selector == Selector::ip) weights = compute_weights(active, model, cfg.weight_neighbors);
      }
    } else {
      t.j_before = t.j_after = j_hat;
    }
    t.n_after = n;
    if (hooks.on_iteration) hooks.on_iteration(t, gen);
    res.trace.push_back(t);
    ++i;
  }

  const Dataset& scoring = res.dataset;  // the modified training set
  res.initial = j_train_report(initial_model, frs, scoring);
  res.modified = j_train_report(modified_model, frs, scoring);
  res.final = j_train_report(model, frs, scoring);
  res.dataset = std::move(active);
  res.model = std::move(model);
  res.instances_added = n;
  return res;
}

inline AugmentationResult run_frote(const FroteConfig& cfg, const Dataset& d, const FeedbackRuleSet& frs,
                                    const TrainerSpec& spec, const FroteHooks& hooks = {}) {
  return run_frote(cfg, d, frs, make_trainer(spec), hooks);
}

}  // namespace frote
