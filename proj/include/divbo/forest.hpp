#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <thread>
#include <vector>

#include "divbo/error.hpp"
#include "divbo/feature_table.hpp"
#include "divbo/regression_tree.hpp"
#include "divbo/rng.hpp"

namespace divbo {

struct ForestParams {
  int n_trees = 10;
  bool bootstrap = true;
  double feature_fraction = 5.0 / 6.0;
  std::int64_t min_samples_leaf = 3;
  int max_depth = 20;
};

// Probabilistic random forest: predictive mean is the average of per-tree
// leaf means, predictive variance the population variance across trees.
struct ProbabilisticForest {
  std::vector<RegressionTree> trees;
  ForestParams params;
  std::size_t n_features = 0;

  // Mean is computed relative to the first tree so unanimous trees return
  // their common value exactly.
  std::pair<double, double> predict(const double* x) const {
    const double anchor = trees.front().predict(x);
    double shift = 0.0;
    for (const auto& tree : trees) shift += tree.predict(x) - anchor;
    const double mean = anchor + shift / static_cast<double>(trees.size());
    double var = 0.0;
    for (const auto& tree : trees) {
      const double d = tree.predict(x) - mean;
      var += d * d;
    }
    var /= static_cast<double>(trees.size());
    return {mean, std::max(var, 0.0)};
  }
};

namespace detail {

inline void validate_fit_inputs(const FeatureTable& x,
                                const std::vector<double>& y,
                                std::size_t min_rows) {
  if (x.n_rows == 0 || x.n_rows < min_rows) {
    throw ValidationError("fit requires at least " + std::to_string(min_rows) +
                          " rows");
  }
  if (x.n_rows != y.size()) {
    throw ValidationError("feature/target row counts differ");
  }
  x.check_finite();
  for (double v : y) {
    if (!std::isfinite(v) || std::abs(v) > 1e3) {
      throw ValidationError("targets must be finite and bounded");
    }
  }
}

inline std::vector<std::int32_t> sample_feature_subset(std::size_t n_features,
                                                       double fraction,
                                                       Rng& rng) {
  const auto k = std::max<std::size_t>(
      1, std::min<std::size_t>(
             n_features,
             static_cast<std::size_t>(std::llround(fraction * n_features))));
  std::vector<std::int32_t> all(n_features);
  std::iota(all.begin(), all.end(), 0);
  if (k < n_features) {
    rng.shuffle(all);
    all.resize(k);
    std::sort(all.begin(), all.end());
  }
  return all;
}

// Runs fn(i) for i in [0, n) across a small thread pool; results land in
// caller-provided storage so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t n_threads =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace detail

inline ProbabilisticForest fit_forest(const FeatureTable& x,
                                      const std::vector<double>& y,
                                      const ForestParams& params,
                                      std::uint64_t seed) {
  detail::validate_fit_inputs(x, y, 1);
  if (params.n_trees < 1) throw ValidationError("forest needs n_trees >= 1");

  const auto sorted = detail::presort_columns(x);
  detail::TreeBuilder builder(x, sorted);
  detail::TreeBuildParams tree_params{params.max_depth,
                                      params.min_samples_leaf};

  ProbabilisticForest forest;
  forest.params = params;
  forest.n_features = x.n_cols;
  forest.trees.resize(params.n_trees);
  detail::parallel_for(params.n_trees, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    std::vector<std::int32_t> weights;
    if (params.bootstrap) {
      weights.assign(x.n_rows, 0);
      for (std::size_t d = 0; d < x.n_rows; ++d) weights[rng.index(x.n_rows)]++;
    } else {
      weights.assign(x.n_rows, 1);
    }
    const auto features =
        detail::sample_feature_subset(x.n_cols, params.feature_fraction, rng);
    forest.trees[i] = builder.build(y, weights, features, tree_params);
  });
  return forest;
}

inline ProbabilisticForest fit_forest(const std::vector<std::vector<double>>& x,
                                      const std::vector<double>& y,
                                      const ForestParams& params,
                                      std::uint64_t seed) {
  return fit_forest(FeatureTable::from_rows(x), y, params, seed);
}

inline std::pair<double, double> predict_forest(const ProbabilisticForest& forest,
                                                const std::vector<double>& x) {
  if (x.size() != forest.n_features) {
    throw ValidationError("prediction width does not match training width");
  }
  return forest.predict(x.data());
}

}  // namespace divbo
