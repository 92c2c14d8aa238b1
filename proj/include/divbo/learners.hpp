#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "divbo/config_space.hpp"
#include "divbo/ensemble.hpp"
#include "divbo/error.hpp"
#include "divbo/feature_table.hpp"
#include "divbo/rng.hpp"

namespace divbo {

// Labeled training/validation views handed to the learner trainers.
struct LabeledData {
  const FeatureTable* x = nullptr;
  const std::vector<std::size_t>* y = nullptr;
  std::size_t n_classes = 0;

  std::size_t rows() const { return x->n_rows; }
  std::size_t cols() const { return x->n_cols; }
};

// Joint space over the five built-in learners. Hyperparameter names are
// prefixed with their algorithm so they stay unique in the flat space.
inline ConfigSpace builtin_space() {
  auto root = HyperparameterDef::categorical(
      "algorithm",
      {"knn", "decision_tree", "naive_bayes", "logistic_regression",
       "random_forest"});
  std::vector<HyperparameterDef> params;
  params.push_back(HyperparameterDef::integer("knn.k", 1, 50)
                       .conditioned_on("algorithm", "knn"));
  params.push_back(
      HyperparameterDef::categorical("knn.weight", {"uniform", "distance"})
          .conditioned_on("algorithm", "knn"));
  params.push_back(HyperparameterDef::integer("dt.max_depth", 1, 20)
                       .conditioned_on("algorithm", "decision_tree"));
  params.push_back(HyperparameterDef::integer("dt.min_samples_split", 2, 20)
                       .conditioned_on("algorithm", "decision_tree"));
  params.push_back(
      HyperparameterDef::categorical("dt.criterion", {"gini", "entropy"})
          .conditioned_on("algorithm", "decision_tree"));
  params.push_back(HyperparameterDef::real("nb.var_smoothing", 1e-10, 1e-1, true)
                       .conditioned_on("algorithm", "naive_bayes"));
  params.push_back(HyperparameterDef::real("lr.learning_rate", 1e-4, 1e0, true)
                       .conditioned_on("algorithm", "logistic_regression"));
  params.push_back(HyperparameterDef::real("lr.l2", 1e-8, 1e1, true)
                       .conditioned_on("algorithm", "logistic_regression"));
  params.push_back(HyperparameterDef::integer("lr.epochs", 10, 200)
                       .conditioned_on("algorithm", "logistic_regression"));
  params.push_back(HyperparameterDef::integer("rf.n_trees", 5, 50)
                       .conditioned_on("algorithm", "random_forest"));
  params.push_back(HyperparameterDef::integer("rf.max_depth", 2, 20)
                       .conditioned_on("algorithm", "random_forest"));
  params.push_back(HyperparameterDef::real("rf.feature_fraction", 0.3, 1.0)
                       .conditioned_on("algorithm", "random_forest"));
  return ConfigSpace(std::move(root), std::move(params));
}

namespace learners {

// ---- k-nearest neighbours ------------------------------------------------

inline PredictionMatrix knn_predict(const LabeledData& train,
                                    const FeatureTable& query, std::int64_t k,
                                    bool distance_weighted) {
  const std::size_t n_train = train.rows();
  const auto kk = static_cast<std::size_t>(
      std::clamp<std::int64_t>(k, 1, static_cast<std::int64_t>(n_train)));
  PredictionMatrix out(query.n_rows, train.n_classes);
  std::vector<std::pair<double, std::size_t>> dist(n_train);
  for (std::size_t r = 0; r < query.n_rows; ++r) {
    const double* q = query.row(r);
    for (std::size_t i = 0; i < n_train; ++i) {
      const double* p = train.x->row(i);
      double d = 0.0;
      for (std::size_t c = 0; c < query.n_cols; ++c) {
        const double delta = q[c] - p[c];
        d += delta * delta;
      }
      dist[i] = {d, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    std::vector<double> mass(train.n_classes, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < kk; ++j) {
      const double weight =
          distance_weighted ? 1.0 / (std::sqrt(dist[j].first) + 1e-8) : 1.0;
      mass[(*train.y)[dist[j].second]] += weight;
      total += weight;
    }
    for (std::size_t c = 0; c < train.n_classes; ++c) {
      out.at(r, c) = static_cast<float>(mass[c] / total);
    }
  }
  return out;
}

// ---- classification CART --------------------------------------------------

struct ClassTreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::vector<double> probs;  // Laplace-smoothed class frequencies at leaves
};

class ClassificationTree {
 public:
  void fit(const LabeledData& train, const std::vector<std::size_t>& rows,
           int max_depth, std::int64_t min_samples_split, bool entropy,
           const std::vector<std::int32_t>* feature_subset = nullptr) {
    train_ = &train;
    entropy_ = entropy;
    max_depth_ = max_depth;
    min_split_ = min_samples_split;
    features_ = feature_subset;
    nodes_.clear();
    grow(rows, 0);
  }

  void predict_row(const double* x, float* out) const {
    std::int32_t id = 0;
    while (nodes_[id].feature >= 0) {
      id = x[nodes_[id].feature] <= nodes_[id].threshold ? nodes_[id].left
                                                         : nodes_[id].right;
    }
    for (std::size_t c = 0; c < nodes_[id].probs.size(); ++c) {
      out[c] = static_cast<float>(nodes_[id].probs[c]);
    }
  }

 private:
  double impurity(const std::vector<double>& counts, double total) const {
    if (total <= 0.0) return 0.0;
    double value = entropy_ ? 0.0 : 1.0;
    for (const double c : counts) {
      if (c <= 0.0) continue;
      const double p = c / total;
      if (entropy_) {
        value -= p * std::log2(p);
      } else {
        value -= p * p;
      }
    }
    return value;
  }

  std::int32_t grow(const std::vector<std::size_t>& rows, int depth) {
    const std::size_t n_classes = train_->n_classes;
    std::vector<double> counts(n_classes, 0.0);
    for (const std::size_t r : rows) counts[(*train_->y)[r]] += 1.0;
    const double total = static_cast<double>(rows.size());

    const auto node_id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(ClassTreeNode{});

    bool pure = false;
    for (const double c : counts) {
      if (c == total) pure = true;
    }
    if (depth >= max_depth_ || pure ||
        static_cast<std::int64_t>(rows.size()) < min_split_) {
      make_leaf(node_id, counts, total);
      return node_id;
    }

    const double parent_impurity = impurity(counts, total);
    double best_gain = 1e-12;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, std::size_t>> column(rows.size());
    const std::size_t n_features = train_->cols();
    for (std::size_t fi = 0; fi < (features_ ? features_->size() : n_features);
         ++fi) {
      const std::int32_t f =
          features_ ? (*features_)[fi] : static_cast<std::int32_t>(fi);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        column[i] = {train_->x->at(rows[i], f), rows[i]};
      }
      std::sort(column.begin(), column.end());
      std::vector<double> left(n_classes, 0.0);
      double n_left = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left[(*train_->y)[column[i].second]] += 1.0;
        n_left += 1.0;
        if (column[i + 1].first == column[i].first) continue;
        std::vector<double> right(n_classes, 0.0);
        for (std::size_t c = 0; c < n_classes; ++c) {
          right[c] = counts[c] - left[c];
        }
        const double n_right = total - n_left;
        const double gain = parent_impurity -
                            (n_left / total) * impurity(left, n_left) -
                            (n_right / total) * impurity(right, n_right);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }

    if (best_feature < 0) {
      make_leaf(node_id, counts, total);
      return node_id;
    }

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (const std::size_t r : rows) {
      if (train_->x->at(r, best_feature) <= best_threshold) {
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }
    const std::int32_t left_id = grow(left_rows, depth + 1);
    const std::int32_t right_id = grow(right_rows, depth + 1);
    nodes_[node_id].feature = best_feature;
    nodes_[node_id].threshold = best_threshold;
    nodes_[node_id].left = left_id;
    nodes_[node_id].right = right_id;
    return node_id;
  }

  void make_leaf(std::int32_t node_id, const std::vector<double>& counts,
                 double total) {
    auto& probs = nodes_[node_id].probs;
    probs.resize(counts.size());
    const double denom = total + static_cast<double>(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
      probs[c] = (counts[c] + 1.0) / denom;  // Laplace smoothing
    }
  }

  const LabeledData* train_ = nullptr;
  bool entropy_ = false;
  int max_depth_ = 20;
  std::int64_t min_split_ = 2;
  const std::vector<std::int32_t>* features_ = nullptr;
  std::vector<ClassTreeNode> nodes_;
};

inline PredictionMatrix tree_predict(const ClassificationTree& tree,
                                     const FeatureTable& query,
                                     std::size_t n_classes) {
  PredictionMatrix out(query.n_rows, n_classes);
  for (std::size_t r = 0; r < query.n_rows; ++r) {
    tree.predict_row(query.row(r), &out.values[r * n_classes]);
  }
  return out;
}

// ---- Gaussian naive Bayes --------------------------------------------------

inline PredictionMatrix gnb_predict(const LabeledData& train,
                                    const FeatureTable& query,
                                    double var_smoothing) {
  const std::size_t n_classes = train.n_classes;
  const std::size_t n_features = train.cols();
  std::vector<double> prior(n_classes, 0.0);
  std::vector<double> mean(n_classes * n_features, 0.0);
  std::vector<double> var(n_classes * n_features, 0.0);

  for (std::size_t r = 0; r < train.rows(); ++r) {
    const std::size_t c = (*train.y)[r];
    prior[c] += 1.0;
    for (std::size_t f = 0; f < n_features; ++f) {
      mean[c * n_features + f] += train.x->at(r, f);
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (prior[c] > 0.0) {
      for (std::size_t f = 0; f < n_features; ++f) {
        mean[c * n_features + f] /= prior[c];
      }
    }
  }
  double max_feature_var = 0.0;
  {
    std::vector<double> global_mean(n_features, 0.0);
    for (std::size_t r = 0; r < train.rows(); ++r) {
      for (std::size_t f = 0; f < n_features; ++f) {
        global_mean[f] += train.x->at(r, f);
      }
    }
    for (auto& g : global_mean) g /= static_cast<double>(train.rows());
    for (std::size_t f = 0; f < n_features; ++f) {
      double v = 0.0;
      for (std::size_t r = 0; r < train.rows(); ++r) {
        const double d = train.x->at(r, f) - global_mean[f];
        v += d * d;
      }
      max_feature_var = std::max(max_feature_var, v / train.rows());
    }
  }
  for (std::size_t r = 0; r < train.rows(); ++r) {
    const std::size_t c = (*train.y)[r];
    for (std::size_t f = 0; f < n_features; ++f) {
      const double d = train.x->at(r, f) - mean[c * n_features + f];
      var[c * n_features + f] += d * d;
    }
  }
  const double eps = var_smoothing * std::max(max_feature_var, 1e-12);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t f = 0; f < n_features; ++f) {
      var[c * n_features + f] =
          (prior[c] > 0.0 ? var[c * n_features + f] / prior[c] : 0.0) + eps;
    }
  }

  const double n_train = static_cast<double>(train.rows());
  PredictionMatrix out(query.n_rows, n_classes);
  std::vector<double> log_like(n_classes, 0.0);
  for (std::size_t r = 0; r < query.n_rows; ++r) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (prior[c] == 0.0) {
        log_like[c] = -1e30;
        continue;
      }
      double ll = std::log(prior[c] / n_train);
      for (std::size_t f = 0; f < n_features; ++f) {
        const double v = var[c * n_features + f];
        const double d = query.at(r, f) - mean[c * n_features + f];
        ll -= 0.5 * (std::log(2.0 * 3.14159265358979323846 * v) + d * d / v);
      }
      log_like[c] = ll;
    }
    const double m = *std::max_element(log_like.begin(), log_like.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      log_like[c] = std::exp(std::clamp(log_like[c] - m, -700.0, 0.0));
      sum += log_like[c];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      out.at(r, c) = static_cast<float>(log_like[c] / sum);
    }
  }
  return out;
}

// ---- multinomial logistic regression ---------------------------------------

inline PredictionMatrix logreg_train_predict(const LabeledData& train,
                                             const FeatureTable& query,
                                             double learning_rate, double l2,
                                             std::int64_t epochs) {
  const std::size_t n_classes = train.n_classes;
  const std::size_t n_features = train.cols();
  const std::size_t n = train.rows();

  // Standardize features with training statistics for stable step sizes.
  std::vector<double> mu(n_features, 0.0);
  std::vector<double> sd(n_features, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < n_features; ++f) mu[f] += train.x->at(r, f);
  }
  for (auto& m : mu) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < n_features; ++f) {
      const double d = train.x->at(r, f) - mu[f];
      sd[f] += d * d;
    }
  }
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(n)) + 1e-12;

  std::vector<double> weights(n_classes * (n_features + 1), 0.0);  // + bias
  std::vector<double> logits(n_classes, 0.0);
  std::vector<double> grad(n_classes * (n_features + 1), 0.0);
  std::vector<double> z(n_features, 0.0);

  for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t f = 0; f < n_features; ++f) {
        z[f] = (train.x->at(r, f) - mu[f]) / sd[f];
      }
      double max_logit = -1e300;
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double* wc = weights.data() + c * (n_features + 1);
        double v = wc[n_features];
        for (std::size_t f = 0; f < n_features; ++f) v += wc[f] * z[f];
        logits[c] = std::clamp(v, -30.0, 30.0);
        max_logit = std::max(max_logit, logits[c]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < n_classes; ++c) {
        logits[c] = std::exp(logits[c] - max_logit);
        sum += logits[c];
      }
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double p = logits[c] / sum;
        const double err = p - (c == (*train.y)[r] ? 1.0 : 0.0);
        double* gc = grad.data() + c * (n_features + 1);
        for (std::size_t f = 0; f < n_features; ++f) gc[f] += err * z[f];
        gc[n_features] += err;
      }
    }
    const double scale = learning_rate / static_cast<double>(n);
    for (std::size_t c = 0; c < n_classes; ++c) {
      double* wc = weights.data() + c * (n_features + 1);
      const double* gc = grad.data() + c * (n_features + 1);
      for (std::size_t f = 0; f < n_features; ++f) {
        wc[f] -= scale * (gc[f] + l2 * wc[f]);
      }
      wc[n_features] -= scale * gc[n_features];
    }
  }

  PredictionMatrix out(query.n_rows, n_classes);
  for (std::size_t r = 0; r < query.n_rows; ++r) {
    double max_logit = -1e300;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double* wc = weights.data() + c * (n_features + 1);
      double v = wc[n_features];
      for (std::size_t f = 0; f < n_features; ++f) {
        v += wc[f] * (query.at(r, f) - mu[f]) / sd[f];
      }
      logits[c] = std::clamp(v, -30.0, 30.0);
      max_logit = std::max(max_logit, logits[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      logits[c] = std::exp(logits[c] - max_logit);
      sum += logits[c];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      out.at(r, c) = static_cast<float>(logits[c] / sum);
    }
  }
  return out;
}

// ---- random-forest-lite -----------------------------------------------------

inline PredictionMatrix rf_predict(const LabeledData& train,
                                   const FeatureTable& query,
                                   std::int64_t n_trees, int max_depth,
                                   double feature_fraction,
                                   std::uint64_t seed) {
  const std::size_t n_classes = train.n_classes;
  const std::size_t n = train.rows();
  std::vector<double> acc(query.n_rows * n_classes, 0.0);
  PredictionMatrix tree_out(query.n_rows, n_classes);
  for (std::int64_t i = 0; i < n_trees; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.index(n);
    std::sort(rows.begin(), rows.end());
    const auto n_feat = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(feature_fraction * train.cols())));
    std::vector<std::int32_t> features(train.cols());
    std::iota(features.begin(), features.end(), 0);
    rng.shuffle(features);
    features.resize(std::min(n_feat, features.size()));
    std::sort(features.begin(), features.end());

    ClassificationTree tree;
    tree.fit(train, rows, max_depth, 2, false, &features);
    tree_out = tree_predict(tree, query, n_classes);
    for (std::size_t j = 0; j < acc.size(); ++j) {
      acc[j] += static_cast<double>(tree_out.values[j]);
    }
  }
  PredictionMatrix out(query.n_rows, n_classes);
  const double inv = 1.0 / static_cast<double>(n_trees);
  for (std::size_t j = 0; j < acc.size(); ++j) {
    out.values[j] = static_cast<float>(acc[j] * inv);
  }
  return out;
}

}  // namespace learners

// Trains the learner selected by the configuration on `train` and returns its
// class-probability predictions on `query`. Deterministic given the seed.
inline PredictionMatrix train_and_predict_matrix(const ConfigSpace& space,
                                                 const Configuration& config,
                                                 const LabeledData& train,
                                                 const FeatureTable& query,
                                                 std::uint64_t seed) {
  space.validate(config);
  if (train.rows() == 0) throw ValidationError("empty training data");
  if (train.cols() != query.n_cols) {
    throw ValidationError("train/query feature widths differ");
  }

  // Single-class training data: predict that class with probability 1.
  bool single_class = true;
  for (const std::size_t label : *train.y) {
    if (label != (*train.y)[0]) {
      single_class = false;
      break;
    }
  }
  if (single_class) {
    PredictionMatrix out(query.n_rows, train.n_classes);
    for (std::size_t r = 0; r < query.n_rows; ++r) {
      out.at(r, (*train.y)[0]) = 1.0f;
    }
    return out;
  }

  const std::string& algo = space.algorithm_of(config);
  if (algo == "knn") {
    return learners::knn_predict(train, query, config.int_at("knn.k"),
                                 config.str_at("knn.weight") == "distance");
  }
  if (algo == "decision_tree") {
    std::vector<std::size_t> rows(train.rows());
    std::iota(rows.begin(), rows.end(), 0);
    learners::ClassificationTree tree;
    tree.fit(train, rows, static_cast<int>(config.int_at("dt.max_depth")),
             config.int_at("dt.min_samples_split"),
             config.str_at("dt.criterion") == "entropy");
    return learners::tree_predict(tree, query, train.n_classes);
  }
  if (algo == "naive_bayes") {
    return learners::gnb_predict(train, query,
                                 config.real_at("nb.var_smoothing"));
  }
  if (algo == "logistic_regression") {
    return learners::logreg_train_predict(
        train, query, config.real_at("lr.learning_rate"),
        config.real_at("lr.l2"), config.int_at("lr.epochs"));
  }
  if (algo == "random_forest") {
    return learners::rf_predict(train, query, config.int_at("rf.n_trees"),
                                static_cast<int>(config.int_at("rf.max_depth")),
                                config.real_at("rf.feature_fraction"), seed);
  }
  throw ValidationError("unknown algorithm '" + algo + "'");
}

// Convenience wrapper: predictions on the validation split and its error.
inline std::pair<PredictionMatrix, double> train_and_predict(
    const ConfigSpace& space, const Configuration& config,
    const LabeledData& train, const LabeledData& val, std::uint64_t seed) {
  PredictionMatrix m =
      train_and_predict_matrix(space, config, train, *val.x, seed);
  const double error = classification_error(m, *val.y);
  return {std::move(m), error};
}

}  // namespace divbo
