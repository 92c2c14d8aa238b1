#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "divbo/error.hpp"
#include "divbo/feature_table.hpp"
#include "divbo/forest.hpp"
#include "divbo/regression_tree.hpp"
#include "divbo/rng.hpp"

namespace divbo {

struct BoostedParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 6;
  double row_subsample = 0.8;
  double feature_subsample = 0.8;
  std::int64_t min_samples_leaf = 5;
};

struct BagParams {
  int n_members = 10;
  BoostedParams member{};
};

// One gradient-boosted regressor: stage-wise residual trees under squared
// error, starting from the global target mean.
struct GradientBoostedModel {
  double base_value = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  double predict(const double* x) const {
    double out = base_value;
    for (const auto& tree : trees) out += learning_rate * tree.predict(x);
    return out;
  }
};

// Bagged ensemble of boosted models; predictive uncertainty is the spread of
// the member predictions.
struct BoostedTreeEnsembleBag {
  std::vector<GradientBoostedModel> members;
  BagParams params;
  std::size_t n_features = 0;

  // Mean is computed relative to the first member so agreeing members
  // return their common value exactly.
  std::pair<double, double> predict(const double* x) const {
    const double anchor = members.front().predict(x);
    double shift = 0.0;
    for (const auto& m : members) shift += m.predict(x) - anchor;
    const double mean = anchor + shift / static_cast<double>(members.size());
    double var = 0.0;
    for (const auto& m : members) {
      const double d = m.predict(x) - mean;
      var += d * d;
    }
    var /= static_cast<double>(members.size());
    return {mean, std::max(var, 0.0)};
  }
};

namespace detail {

// Canonical (sorted-order) mean, so the base value is independent of row
// order.
inline double ordered_mean(const std::vector<double>& y) {
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  return sum / static_cast<double>(sorted.size());
}

inline GradientBoostedModel fit_boosted_member(
    const FeatureTable& x, const std::vector<double>& y,
    const std::vector<std::vector<std::int32_t>>& sorted_columns,
    const BoostedParams& params, std::uint64_t seed) {
  const std::size_t n = x.n_rows;
  GradientBoostedModel model;
  model.learning_rate = params.learning_rate;
  model.base_value = ordered_mean(y);
  model.trees.reserve(params.n_rounds);

  TreeBuilder builder(x, sorted_columns);
  TreeBuildParams tree_params{params.max_depth, params.min_samples_leaf};

  Rng rng(seed);
  std::vector<double> current(n, model.base_value);
  std::vector<double> residual(n, 0.0);
  std::vector<std::int32_t> weights(n, 1);
  std::vector<std::int32_t> row_pool(n);
  std::iota(row_pool.begin(), row_pool.end(), 0);

  const bool subsample_rows = params.row_subsample < 1.0;
  const auto n_in_bag = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.row_subsample * n)));

  for (int round = 0; round < params.n_rounds; ++round) {
    if (subsample_rows) {
      rng.shuffle(row_pool);
      std::fill(weights.begin(), weights.end(), 0);
      for (std::size_t i = 0; i < n_in_bag; ++i) weights[row_pool[i]] = 1;
    }
    for (std::size_t r = 0; r < n; ++r) residual[r] = y[r] - current[r];
    const auto features =
        sample_feature_subset(x.n_cols, params.feature_subsample, rng);
    RegressionTree tree =
        builder.build(residual, weights, features, tree_params);
    for (std::size_t r = 0; r < n; ++r) {
      current[r] += params.learning_rate * tree.predict(x.row(r));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace detail

inline BoostedTreeEnsembleBag fit_boosted_bag(const FeatureTable& x,
                                              const std::vector<double>& y,
                                              const BagParams& params,
                                              std::uint64_t seed) {
  detail::validate_fit_inputs(x, y, 2);
  if (params.n_members < 2) {
    throw ValidationError("bag needs n_members >= 2 for a defined variance");
  }
  const auto sorted = detail::presort_columns(x);
  BoostedTreeEnsembleBag bag;
  bag.params = params;
  bag.n_features = x.n_cols;
  bag.members.resize(params.n_members);
  detail::parallel_for(params.n_members, [&](std::size_t m) {
    bag.members[m] = detail::fit_boosted_member(x, y, sorted, params.member,
                                                derive_seed(seed, m));
  });
  return bag;
}

inline BoostedTreeEnsembleBag fit_boosted_bag(
    const std::vector<std::vector<double>>& x, const std::vector<double>& y,
    const BagParams& params, std::uint64_t seed) {
  return fit_boosted_bag(FeatureTable::from_rows(x), y, params, seed);
}

inline std::pair<double, double> predict_boosted_bag(
    const BoostedTreeEnsembleBag& bag, const std::vector<double>& x) {
  if (x.size() != bag.n_features) {
    throw ValidationError("prediction width does not match training width");
  }
  return bag.predict(x.data());
}

// Draws from Normal(mean, variance) at x. A variance below 1e-12 is treated
// as degenerate: every draw equals the mean.
inline std::vector<double> sample_boosted_bag(const BoostedTreeEnsembleBag& bag,
                                              const std::vector<double>& x,
                                              std::size_t n,
                                              std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample_boosted_bag requires n >= 1");
  const auto [mean, var] = predict_boosted_bag(bag, x);
  std::vector<double> draws(n, mean);
  if (var >= 1e-12) {
    Rng rng(seed);
    const double sd = std::sqrt(var);
    for (auto& d : draws) d = mean + sd * rng.normal();
  }
  return draws;
}

}  // namespace divbo
