#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frote/dataset.hpp"
#include "frote/error.hpp"
#include "frote/rng.hpp"
#include "frote/rules.hpp"

namespace frote {

/// A fitted classifier. Implementations are immutable after construction.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual LabelId predict(std::span<const double> values) const = 0;
  virtual std::string_view kind() const = 0;
  virtual nlohmann::json state() const = 0;
};

/// Fitted model bound to the schema it was trained on.
class Model {
 public:
  Model(std::shared_ptr<const Classifier> impl, const Schema& schema)
      : impl_(std::move(impl)), fingerprint_(schema.fingerprint()), arity_(schema.size()), labels_(schema.num_labels()) {
    if (!impl_) throw Error("model without classifier");
  }

  LabelId predict(std::span<const double> values) const {
    if (values.size() != arity_)
      throw ValidationError("model expects " + std::to_string(arity_) + " attributes, got " +
                            std::to_string(values.size()));
    return impl_->predict(values);
  }

  LabelId predict(const Instance& x) const { return predict(x.values); }

  std::vector<LabelId> predict_all(const Dataset& d) const {
    check_schema(d.schema());
    std::vector<LabelId> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = impl_->predict(d[i].values);
    return out;
  }

  void check_schema(const Schema& s) const {
    if (s.fingerprint() != fingerprint_) throw ValidationError("model was trained on a different schema");
  }

  std::uint64_t schema_fingerprint() const noexcept { return fingerprint_; }
  const Classifier& classifier() const noexcept { return *impl_; }
  std::string_view kind() const { return impl_->kind(); }
  std::size_t num_labels() const noexcept { return labels_; }

  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& j, const Schema& schema);

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << to_json().dump() << '\n';
  }

  static Model load(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in), schema);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }

 private:
  std::shared_ptr<const Classifier> impl_;
  std::uint64_t fingerprint_;
  std::size_t arity_;
  std::size_t labels_;
};

// ---------------------------------------------------------------------------

class ConstantClassifier final : public Classifier {
 public:
  explicit ConstantClassifier(LabelId label) : label_(label) {}
  LabelId predict(std::span<const double>) const override { return label_; }
  std::string_view kind() const override { return "constant"; }
  nlohmann::json state() const override { return {{"label", label_}}; }

 private:
  LabelId label_;
};

// ---------------------------------------------------------------------------
// Logistic regression

/// Maps rows to dense feature vectors: numeric attributes pass through (optionally
/// standardised), categorical attributes become one-hot blocks in declaration order.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;

  static FeatureEncoder fit(const Dataset& d, bool standardize) {
    const auto& s = d.schema();
    FeatureEncoder e;
    for (std::size_t a = 0; a < s.size(); ++a) {
      const auto& attr = s.attribute(a);
      if (attr.is_categorical()) {
        e.blocks_.push_back({a, true, attr.categories.size(), 0.0, 1.0});
        e.width_ += attr.categories.size();
      } else {
        double mean = 0, scale = 1;
        if (standardize && !d.empty()) {
          for (const auto& r : d.rows()) mean += r.values[a];
          mean /= static_cast<double>(d.size());
          double var = 0;
          for (const auto& r : d.rows()) var += (r.values[a] - mean) * (r.values[a] - mean);
          var /= static_cast<double>(d.size());
          scale = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        e.blocks_.push_back({a, false, 1, mean, scale});
        e.width_ += 1;
      }
    }
    return e;
  }

  std::size_t width() const noexcept { return width_; }

  void encode(std::span<const double> values, std::span<double> out) const {
    std::size_t col = 0;
    for (const auto& b : blocks_) {
      if (b.categorical) {
        for (std::size_t c = 0; c < b.width; ++c) out[col + c] = 0.0;
        out[col + static_cast<std::size_t>(values[b.attribute])] = 1.0;
      } else {
        out[col] = (values[b.attribute] - b.mean) / b.scale;
      }
      col += b.width;
    }
  }

  std::vector<double> encode_all(const Dataset& d) const {
    std::vector<double> x(d.size() * width_);
    for (std::size_t i = 0; i < d.size(); ++i)
      encode(d[i].values, std::span<double>(x).subspan(i * width_, width_));
    return x;
  }

  nlohmann::json state() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : blocks_)
      arr.push_back({{"attribute", b.attribute}, {"categorical", b.categorical}, {"width", b.width},
                     {"mean", b.mean}, {"scale", b.scale}});
    return arr;
  }

  static FeatureEncoder from_state(const nlohmann::json& j) {
    FeatureEncoder e;
    for (const auto& jb : j) {
      Block b{jb.at("attribute").get<std::size_t>(), jb.at("categorical").get<bool>(), jb.at("width").get<std::size_t>(),
              jb.at("mean").get<double>(), jb.at("scale").get<double>()};
      e.width_ += b.width;
      e.blocks_.push_back(b);
    }
    return e;
  }

 private:
  struct Block {
    std::size_t attribute;
    bool categorical;
    std::size_t width;
    double mean;
    double scale;
  };
  std::vector<Block> blocks_;
  std::size_t width_ = 0;
};

struct LogisticParams {
  std::size_t iterations = 500;
  double learning_rate = 1.0;
  double c = 1.0;  // inverse L2 strength, as in the usual C parameter
};

namespace logistic {

/// Mean softmax cross-entropy plus (l2 / 2) * ||W||^2 for parameters laid out as
/// W (classes x features, row-major) followed by the biases. Writes the gradient
/// into `grad` when non-null.
inline double loss_and_gradient(std::span<const double> x, std::size_t features, std::span<const LabelId> y,
                                std::size_t classes, std::span<const double> theta, double l2,
                                std::vector<double>* grad) {
  const std::size_t n = y.size();
  const double* w = theta.data();
  const double* b = theta.data() + classes * features;
  if (grad) grad->assign(theta.size(), 0.0);
  std::vector<double> z(classes);
  double loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * features;
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < classes; ++k) {
      double s = b[k];
      const double* wk = w + k * features;
      for (std::size_t f = 0; f < features; ++f) s += wk[f] * xi[f];
      z[k] = s;
      zmax = std::max(zmax, s);
    }
    double sum = 0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(z[k] - zmax);
    const double log_norm = zmax + std::log(sum);
    loss -= z[y[i]] - log_norm;
    if (grad) {
      for (std::size_t k = 0; k < classes; ++k) {
        const double r = std::exp(z[k] - log_norm) - (k == y[i] ? 1.0 : 0.0);
        double* gk = grad->data() + k * features;
        for (std::size_t f = 0; f < features; ++f) gk[f] += r * xi[f];
        (*grad)[classes * features + k] += r;
      }
    }
  }
  const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
  loss *= inv_n;
  double wsq = 0;
  for (std::size_t i = 0; i < classes * features; ++i) wsq += w[i] * w[i];
  loss += 0.5 * l2 * wsq;
  if (grad) {
    for (auto& g : *grad) g *= inv_n;
    for (std::size_t i = 0; i < classes * features; ++i) (*grad)[i] += l2 * w[i];
  }
  return loss;
}

}  // namespace logistic

class LogisticRegression final : public Classifier {
 public:
  LogisticRegression(FeatureEncoder encoder, std::size_t classes, std::vector<double> theta)
      : enc_(std::move(encoder)), classes_(classes), theta_(std::move(theta)) {}

  /// Full-batch gradient descent from zero; the step is halved whenever a step
  /// would increase the loss (that step is discarded).
  static std::shared_ptr<const LogisticRegression> fit(const Dataset& d, const LogisticParams& p) {
    auto enc = FeatureEncoder::fit(d, true);
    const std::size_t f = enc.width();
    const std::size_t k = d.schema().num_labels();
    const auto x = enc.encode_all(d);
    std::vector<LabelId> y(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) y[i] = d[i].label;
    const double l2 = 1.0 / (p.c * static_cast<double>(std::max<std::size_t>(d.size(), 1)));

    std::vector<double> theta(k * f + k, 0.0);
    std::vector<double> grad, trial(theta.size()), trial_grad;
    double loss = logistic::loss_and_gradient(x, f, y, k, theta, l2, &grad);
    double step = p.learning_rate;
    for (std::size_t it = 0; it < p.iterations; ++it) {
      double gnorm = 0;
      for (double g : grad) gnorm += g * g;
      if (gnorm < 1e-20) break;
      for (std::size_t i = 0; i < theta.size(); ++i) trial[i] = theta[i] - step * grad[i];
      const double trial_loss = logistic::loss_and_gradient(x, f, y, k, trial, l2, &trial_grad);
      if (trial_loss > loss) {
        step *= 0.5;
        continue;
      }
      theta.swap(trial);
      grad.swap(trial_grad);
      loss = trial_loss;
    }
    return std::make_shared<const LogisticRegression>(std::move(enc), k, std::move(theta));
  }

  std::vector<double> scores(std::span<const double> values) const {
    const std::size_t f = enc_.width();
    std::vector<double> xf(f);
    enc_.encode(values, xf);
    std::vector<double> z(classes_);
    for (std::size_t k = 0; k < classes_; ++k) {
      double s = theta_[classes_ * f + k];
      for (std::size_t j = 0; j < f; ++j) s += theta_[k * f + j] * xf[j];
      z[k] = s;
    }
    return z;
  }

  LabelId predict(std::span<const double> values) const override {
    const auto z = scores(values);
    return static_cast<LabelId>(std::max_element(z.begin(), z.end()) - z.begin());
  }

  std::string_view kind() const override { return "logistic_regression"; }
  nlohmann::json state() const override {
    return {{"encoder", enc_.state()}, {"classes", classes_}, {"theta", theta_}};
  }

  static std::shared_ptr<const LogisticRegression> from_state(const nlohmann::json& j) {
    return std::make_shared<const LogisticRegression>(FeatureEncoder::from_state(j.at("encoder")),
                                                      j.at("classes").get<std::size_t>(),
                                                      j.at("theta").get<std::vector<double>>());
  }

  const std::vector<double>& parameters() const noexcept { return theta_; }

 private:
  FeatureEncoder enc_;
  std::size_t classes_;
  std::vector<double> theta_;
};

// ---------------------------------------------------------------------------
// CART decision tree and bagged forest

struct TreeParams {
  std::size_t max_depth = 5;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // attributes tried per split; 0 = all
};

struct TreePath {
  std::vector<Predicate> predicates;
  LabelId majority = 0;
  std::size_t samples = 0;
};

class DecisionTree final : public Classifier {
 public:
  struct Node {
    int attribute = -1;        // -1 for a leaf
    bool categorical = false;
    double split = 0;          // numeric: x <= split goes left; categorical: x == split goes left
    std::size_t left = 0;
    std::size_t right = 0;
    std::vector<double> counts;  // class counts of training rows reaching the node
  };

  DecisionTree(std::vector<Node> nodes, std::size_t classes) : nodes_(std::move(nodes)), classes_(classes) {}

  /// Fits on `rows` of `d` (repeats allowed). `rng` drives feature subsampling only.
  static std::shared_ptr<const DecisionTree> fit(const Dataset& d, std::vector<std::size_t> rows,
                                                 const TreeParams& p, Rng& rng) {
    Builder b{d, p, rng, {}, d.schema().num_labels()};
    b.grow(rows, 0);
    return std::make_shared<const DecisionTree>(std::move(b.nodes), d.schema().num_labels());
  }

  static std::shared_ptr<const DecisionTree> fit(const Dataset& d, const TreeParams& p, std::uint64_t seed = 0) {
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), 0);
    Rng rng(seed);
    return fit(d, std::move(rows), p, rng);
  }

  const Node& leaf_for(std::span<const double> values) const {
    std::size_t n = 0;
    while (nodes_[n].attribute >= 0) {
      const auto& node = nodes_[n];
      const double v = values[static_cast<std::size_t>(node.attribute)];
      const bool left = node.categorical ? v == node.split : v <= node.split;
      n = left ? node.left : node.right;
    }
    return nodes_[n];
  }

  LabelId predict(std::span<const double> values) const override { return argmax(leaf_for(values).counts); }

  std::string_view kind() const override { return "decision_tree"; }

  nlohmann::json state() const override {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : nodes_)
      arr.push_back({{"attribute", n.attribute}, {"categorical", n.categorical}, {"split", n.split},
                     {"left", n.left}, {"right", n.right}, {"counts", n.counts}});
    return {{"classes", classes_}, {"nodes", arr}};
  }

  static std::shared_ptr<const DecisionTree> from_state(const nlohmann::json& j) {
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes"))
      nodes.push_back({jn.at("attribute").get<int>(), jn.at("categorical").get<bool>(), jn.at("split").get<double>(),
                       jn.at("left").get<std::size_t>(), jn.at("right").get<std::size_t>(),
                       jn.at("counts").get<std::vector<double>>()});
    return std::make_shared<const DecisionTree>(std::move(nodes), j.at("classes").get<std::size_t>());
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.attribute < 0; }));
  }

  /// Root-to-leaf paths as predicate lists, left to right.
  std::vector<TreePath> paths() const {
    std::vector<TreePath> out;
    std::vector<Predicate> stack;
    walk(0, stack, out);
    return out;
  }

  static LabelId argmax(const std::vector<double>& v) {
    return static_cast<LabelId>(std::max_element(v.begin(), v.end()) - v.begin());
  }

 private:
  void walk(std::size_t n, std::vector<Predicate>& stack, std::vector<TreePath>& out) const {
    const auto& node = nodes_[n];
    if (node.attribute < 0) {
      const double total = std::accumulate(node.counts.begin(), node.counts.end(), 0.0);
      out.push_back({stack, argmax(node.counts), static_cast<std::size_t>(total)});
      return;
    }
    const auto a = static_cast<std::size_t>(node.attribute);
    stack.push_back({a, node.categorical ? Op::eq : Op::le, node.split});
    walk(node.left, stack, out);
    stack.back() = {a, node.categorical ? Op::ne : Op::gt, node.split};
    walk(node.right, stack, out);
    stack.pop_back();
  }

  struct Builder {
    const Dataset& d;
    const TreeParams& p;
    Rng& rng;
    std::vector<Node> nodes;
    std::size_t classes;

    static double gini_mass(const std::vector<double>& counts, double total) {
      if (total <= 0) return 0;
      double s = 0;
      for (double c : counts) s += c * c;
      return total - s / total;  // total * gini impurity
    }

    struct Split {
      bool found = false;
      int attribute = -1;
      bool categorical = false;
      double value = 0;
      double impurity = 0;
    };

    std::vector<std::size_t> candidate_attributes() {
      const std::size_t m = d.schema().size();
      std::vector<std::size_t> attrs(m);
      std::iota(attrs.begin(), attrs.end(), 0);
      if (p.max_features > 0 && p.max_features < m) {
        for (std::size_t i = 0; i < p.max_features; ++i) std::swap(attrs[i], attrs[i + uniform_index(rng, m - i)]);
        attrs.resize(p.max_features);
        std::sort(attrs.begin(), attrs.end());
      }
      return attrs;
    }

    Split best_split(const std::vector<std::size_t>& rows, double parent_mass) {
      Split best;
      best.impurity = parent_mass - 1e-12;
      const double n = static_cast<double>(rows.size());
      const double min_leaf = static_cast<double>(std::max<std::size_t>(p.min_samples_leaf, 1));
      for (auto a : candidate_attributes()) {
        const auto& attr = d.schema().attribute(a);
        if (attr.is_numeric()) {
          std::vector<std::pair<double, LabelId>> v;
          v.reserve(rows.size());
          for (auto r : rows) v.emplace_back(d[r].values[a], d[r].label);
          std::sort(v.begin(), v.end());
          std::vector<double> left(classes, 0.0), right(classes, 0.0);
          for (const auto& e : v) right[e.second] += 1;
          for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            left[v[i].second] += 1;
            right[v[i].second] -= 1;
            if (v[i].first == v[i + 1].first) continue;
            const double nl = static_cast<double>(i + 1), nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            const double imp = gini_mass(left, nl) + gini_mass(right, nr);
            if (imp < best.impurity) {
              best = {true, static_cast<int>(a), false, v[i].first + (v[i + 1].first - v[i].first) / 2, imp};
            }
          }
        } else {
          const std::size_t nc = attr.categories.size();
          std::vector<std::vector<double>> per(nc, std::vector<double>(classes, 0.0));
          std::vector<double> total(classes, 0.0);
          for (auto r : rows) {
            per[static_cast<std::size_t>(d[r].values[a])][d[r].label] += 1;
            total[d[r].label] += 1;
          }
          for (std::size_t c = 0; c < nc; ++c) {
            const double nl = std::accumulate(per[c].begin(), per[c].end(), 0.0), nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            std::vector<double> rest(classes);
            for (std::size_t k = 0; k < classes; ++k) rest[k] = total[k] - per[c][k];
            const double imp = gini_mass(per[c], nl) + gini_mass(rest, nr);
            if (imp < best.impurity) best = {true, static_cast<int>(a), true, static_cast<double>(c), imp};
          }
        }
      }
      return best;
    }

    std::size_t grow(const std::vector<std::size_t>& rows, std::size_t depth) {
      const std::size_t id = nodes.size();
      nodes.push_back({});
      std::vector<double> counts(classes, 0.0);
      for (auto r : rows) counts[d[r].label] += 1;
      nodes[id].counts = counts;
      const double n = static_cast<double>(rows.size());
      const double mass = gini_mass(counts, n);
      if (depth >= p.max_depth || mass <= 1e-12 || rows.size() < 2 * std::max<std::size_t>(p.min_samples_leaf, 1))
        return id;
      const Split s = best_split(rows, mass);
      if (!s.found) return id;
      std::vector<std::size_t> left, right;
      const auto a = static_cast<std::size_t>(s.attribute);
      for (auto r : rows) {
        const double v = d[r].values[a];
        ((s.categorical ? v == s.value : v <= s.value) ? left : right).push_back(r);
      }
      nodes[id].attribute = s.attribute;
      nodes[id].categorical = s.categorical;
      nodes[id].split = s.value;
      const auto l = grow(left, depth + 1);
      const auto r = grow(right, depth + 1);
      nodes[id].left = l;
      nodes[id].right = r;
      return id;
    }
  };

  std::vector<Node> nodes_;
  std::size_t classes_;
};

struct ForestParams {
  std::size_t trees = 100;
  std::size_t max_depth = 3;
  double bag_fraction = 1.0;     // bootstrap sample size relative to |D|
  std::size_t max_features = 0;  // 0 = round(sqrt(#attributes))
};

class RandomForest final : public Classifier {
 public:
  explicit RandomForest(std::vector<std::shared_ptr<const DecisionTree>> trees, std::size_t classes)
      : trees_(std::move(trees)), classes_(classes) {}

  /// Tree t draws its bootstrap sample and feature subsets from a stream derived
  /// from (seed, t), so the fit is reproducible.
  static std::shared_ptr<const RandomForest> fit(const Dataset& d, const ForestParams& p, std::uint64_t seed) {
    TreeParams tp;
    tp.max_depth = p.max_depth;
    const std::size_t m = d.schema().size();
    tp.max_features = p.max_features ? p.max_features
                                     : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(m))));
    const std::size_t sample = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(p.bag_fraction * d.size())));
    std::vector<std::shared_ptr<const DecisionTree>> trees;
    trees.reserve(p.trees);
    for (std::size_t t = 0; t < p.trees; ++t) {
      Rng rng = make_rng(seed, "forest-tree", t);
      std::vector<std::size_t> rows(sample);
      for (auto& r : rows) r = uniform_index(rng, d.size());
      trees.push_back(DecisionTree::fit(d, std::move(rows), tp, rng));
    }
    return std::make_shared<const RandomForest>(std::move(trees), d.schema().num_labels());
  }

  /// Averages each tree's leaf class frequencies; ties go to the lower label index.
  LabelId predict(std::span<const double> values) const override {
    std::vector<double> acc(classes_, 0.0);
    for (const auto& t : trees_) {
      const auto& counts = t->leaf_for(values).counts;
      const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
      if (total <= 0) continue;
      for (std::size_t k = 0; k < classes_; ++k) acc[k] += counts[k] / total;
    }
    return DecisionTree::argmax(acc);
  }

  std::string_view kind() const override { return "random_forest_lite"; }

  nlohmann::json state() const override {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees_) arr.push_back(t->state());
    return {{"classes", classes_}, {"trees", arr}};
  }

  static std::shared_ptr<const RandomForest> from_state(const nlohmann::json& j) {
    std::vector<std::shared_ptr<const DecisionTree>> trees;
    for (const auto& jt : j.at("trees")) trees.push_back(DecisionTree::from_state(jt));
    return std::make_shared<const RandomForest>(std::move(trees), j.at("classes").get<std::size_t>());
  }

  const std::vector<std::shared_ptr<const DecisionTree>>& trees() const noexcept { return trees_; }

 private:
  std::vector<std::shared_ptr<const DecisionTree>> trees_;
  std::size_t classes_;
};

// ---------------------------------------------------------------------------
// Trainer specification

enum class ModelKind { logistic_regression, random_forest_lite, decision_tree };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::random_forest_lite: return "random_forest_lite";
    case ModelKind::decision_tree: return "decision_tree";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "logreg" || s == "lr" || s == "logistic_regression") return ModelKind::logistic_regression;
  if (s == "forest" || s == "rf" || s == "random_forest_lite") return ModelKind::random_forest_lite;
  if (s == "tree" || s == "decision_tree") return ModelKind::decision_tree;
  throw ValidationError("unknown model kind '" + std::string(s) + "'");
}

struct TrainerSpec {
  ModelKind kind = ModelKind::logistic_regression;
  LogisticParams logistic;
  TreeParams tree;
  ForestParams forest;

  /// Builds a spec from a kind name and a flat hyperparameter object. Unknown keys
  /// and out-of-range values are validation errors.
  static TrainerSpec parse(std::string_view kind, const nlohmann::json& hyper = nlohmann::json::object()) {
    TrainerSpec s;
    s.kind = parse_model_kind(kind);
    if (hyper.is_null()) return s;
    if (!hyper.is_object()) throw ValidationError("hyperparameters must be a JSON object");
    auto count = [](const nlohmann::json& v, const std::string& key, std::size_t min) {
      if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min))
        throw ValidationError("hyperparameter '" + key + "' must be an integer >= " + std::to_string(min));
      return v.get<std::size_t>();
    };
    auto positive = [](const nlohmann::json& v, const std::string& key) {
      if (!v.is_number() || !(v.get<double>() > 0)) throw ValidationError("hyperparameter '" + key + "' must be > 0");
      return v.get<double>();
    };
    for (const auto& [key, v] : hyper.items()) {
      switch (s.kind) {
        case ModelKind::logistic_regression:
          if (key == "iterations") s.logistic.iterations = count(v, key, 1);
          else if (key == "learning_rate") s.logistic.learning_rate = positive(v, key);
          else if (key == "C" || key == "c") s.logistic.c = positive(v, key);
          else throw ValidationError("unknown logistic_regression hyperparameter '" + key + "'");
          break;
        case ModelKind::decision_tree:
          if (key == "max_depth") s.tree.max_depth = count(v, key, 1);
          else if (key == "min_samples_leaf") s.tree.min_samples_leaf = count(v, key, 1);
          else throw ValidationError("unknown decision_tree hyperparameter '" + key + "'");
          break;
        case ModelKind::random_forest_lite:
          if (key == "trees") s.forest.trees = count(v, key, 1);
          else if (key == "max_depth") s.forest.max_depth = count(v, key, 1);
          else if (key == "bag_fraction") {
            s.forest.bag_fraction = positive(v, key);
            if (s.forest.bag_fraction > 1) throw ValidationError("bag_fraction must be <= 1");
          } else if (key == "max_features") s.forest.max_features = count(v, key, 0);  // 0 = sqrt
          else throw ValidationError("unknown random_forest_lite hyperparameter '" + key + "'");
          break;
      }
    }
    return s;
  }

  nlohmann::json hyperparameters() const {
    switch (kind) {
      case ModelKind::logistic_regression:
        return {{"iterations", logistic.iterations}, {"learning_rate", logistic.learning_rate}, {"C", logistic.c}};
      case ModelKind::decision_tree:
        return {{"max_depth", tree.max_depth}, {"min_samples_leaf", tree.min_samples_leaf}};
      case ModelKind::random_forest_lite:
        return {{"trees", forest.trees}, {"max_depth", forest.max_depth}, {"bag_fraction", forest.bag_fraction},
                {"max_features", forest.max_features}};
    }
    return nlohmann::json::object();
  }

  nlohmann::json to_json() const { return {{"kind", std::string(to_string(kind))}, {"hyperparameters", hyperparameters()}}; }
};

/// Fits the spec's learner. A dataset with a single class (or no rows) yields a
/// constant classifier.
inline Model train(const TrainerSpec& spec, const Dataset& d, std::uint64_t seed) {
  const auto counts = d.label_counts();
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  if (present <= 1) {
    const LabelId only = present == 1 ? static_cast<LabelId>(std::find_if(counts.begin(), counts.end(),
                                                                          [](std::size_t c) { return c > 0; }) -
                                                             counts.begin())
                                      : 0;
    return Model(std::make_shared<const ConstantClassifier>(only), d.schema());
  }
  switch (spec.kind) {
    case ModelKind::logistic_regression: return Model(LogisticRegression::fit(d, spec.logistic), d.schema());
    case ModelKind::decision_tree: return Model(DecisionTree::fit(d, spec.tree, seed), d.schema());
    case ModelKind::random_forest_lite: return Model(RandomForest::fit(d, spec.forest, seed), d.schema());
  }
  throw Error("unreachable model kind");
}

/// The training algorithm as a black box: dataset and seed in, fitted model out.
using Trainer = std::function<Model(const Dataset&, std::uint64_t)>;

inline Trainer make_trainer(TrainerSpec spec) {
  return [spec](const Dataset& d, std::uint64_t seed) { return train(spec, d, seed); };
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json Model::to_json() const {
  return {{"format", "frote-model"},
          {"version", kModelFormatVersion},
          {"kind", std::string(impl_->kind())},
          {"schema_fingerprint", std::to_string(fingerprint_)},
          {"state", impl_->state()}};
}

inline Model Model::from_json(const nlohmann::json& j, const Schema& schema) {
  if (j.value("format", "") != "frote-model") throw ValidationError("not a model file");
  if (j.value("version", 0) != kModelFormatVersion) throw ValidationError("unsupported model format version");
  if (j.at("schema_fingerprint").get<std::string>() != std::to_string(schema.fingerprint()))
    throw ValidationError("model was trained on a different schema");
  const auto kind = j.at("kind").get<std::string>();
  const auto& st = j.at("state");
  if (kind == "constant") return Model(std::make_shared<const ConstantClassifier>(st.at("label").get<LabelId>()), schema);
  if (kind == "logistic_regression") return Model(LogisticRegression::from_state(st), schema);
  if (kind == "decision_tree") return Model(DecisionTree::from_state(st), schema);
  if (kind == "random_forest_lite") return Model(RandomForest::from_state(st), schema);
  throw ValidationError("unknown model kind '" + kind + "'");
}

}  // namespace frote
