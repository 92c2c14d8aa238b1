#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "divbo/boosted.hpp"
#include "divbo/config_space.hpp"
#include "divbo/ensemble.hpp"
#include "divbo/error.hpp"
#include "divbo/forest.hpp"
#include "divbo/run_history.hpp"
#include "divbo/stats.hpp"

namespace divbo {

// Performance surrogate: probabilistic forest over encoded configurations,
// plus the incumbent (lowest observed validation error).
struct PerfSurrogate {
  ProbabilisticForest model;
  double y_best = 1.0;
};

inline PerfSurrogate fit_perf(const RunHistory& history, const ConfigSpace& space,
                              const ForestParams& params, std::uint64_t seed) {
  if (history.empty()) throw ValidationError("fit_perf needs observations");
  FeatureTable x(history.size(), space.encoding_dim());
  std::vector<double> y(history.size());
  double y_best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& obs = history.at(i);
    const auto enc = space.encode(obs.config);
    std::copy(enc.begin(), enc.end(), x.values.begin() + i * x.n_cols);
    y[i] = obs.status == EvalStatus::Ok ? obs.error : 1.0;
    y_best = std::min(y_best, y[i]);
  }
  PerfSurrogate surrogate;
  surrogate.model = fit_forest(x, y, params, seed);
  surrogate.y_best = y_best;
  return surrogate;
}

// Expected improvement for minimization from a Gaussian posterior.
inline double expected_improvement(double mean, double variance, double y_best) {
  const double sigma = std::sqrt(std::max(variance, 0.0));
  const double delta = y_best - mean;
  if (sigma < 1e-12) return std::max(delta, 0.0);
  const double z = delta / sigma;
  return std::max(0.0, delta * normal_cdf(z) + sigma * normal_pdf(z));
}

inline double expected_improvement(const PerfSurrogate& s, const ConfigSpace& space,
                                   const Configuration& config) {
  const auto enc = space.encode(config);
  const auto [mean, var] = predict_forest(s.model, enc);
  return expected_improvement(mean, var, s.y_best);
}

inline double expected_improvement_at(const PerfSurrogate& s,
                                      const std::vector<double>& encoding) {
  const auto [mean, var] = predict_forest(s.model, encoding);
  return expected_improvement(mean, var, s.y_best);
}

// Diversity surrogate: bagged boosted trees over concatenated pair encodings
// [enc(x_i) || enc(x_j)], trained on every ordered pair so symmetry is
// encouraged by the data itself.
struct DivSurrogate {
  BoostedTreeEnsembleBag bag;
};

struct PairTrainingSet {
  FeatureTable x;          // |D|^2 rows, 2*encoding_dim columns
  std::vector<double> y;   // Eq. 3 diversity targets
};

// All |D|^2 ordered pairs including self-pairs. Targets are computed once per
// unordered pair (so (i,j) and (j,i) are bit-identical) from the stored
// prediction matrices; self-pair targets are exactly zero. An optional sample
// cap bounds the validation rows entering the diversity computation.
inline PairTrainingSet build_pair_training_set(
    const RunHistory& history, const ConfigSpace& space,
    std::size_t sample_cap = 0, std::uint64_t cap_seed = 0) {
  const std::size_t n = history.size();
  if (n == 0) throw ValidationError("pair training set needs observations");
  const auto& first = history.at(0).predictions;
  for (std::size_t i = 1; i < n; ++i) {
    if (!history.at(i).predictions.same_shape(first)) {
      throw ValidationError("stored prediction matrices have mixed shapes");
    }
  }

  std::optional<std::vector<std::size_t>> rows;
  if (sample_cap > 0 && sample_cap < first.n_samples) {
    rows = subset_indices(first.n_samples, sample_cap, cap_seed);
  }

  std::vector<std::vector<double>> encodings(n);
  for (std::size_t i = 0; i < n; ++i) {
    encodings[i] = space.encode(history.at(i).config);
  }
  const std::size_t dim = space.encoding_dim();

  std::vector<double> div(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d =
          rows ? diversity_on_subset(history.at(i).predictions,
                                     history.at(j).predictions, *rows)
               : diversity(history.at(i).predictions, history.at(j).predictions);
      div[i * n + j] = d;
      div[j * n + i] = d;
    }
  }

  PairTrainingSet set;
  set.x = FeatureTable(n * n, 2 * dim);
  set.y.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double* row = set.x.values.data() + (i * n + j) * set.x.n_cols;
      std::copy(encodings[i].begin(), encodings[i].end(), row);
      std::copy(encodings[j].begin(), encodings[j].end(), row + dim);
      set.y[i * n + j] = div[i * n + j];
    }
  }
  return set;
}

inline DivSurrogate fit_div(const RunHistory& history, const ConfigSpace& space,
                            const BagParams& params, std::uint64_t seed,
                            std::size_t sample_cap = 0,
                            std::uint64_t cap_seed = 0) {
  if (history.size() < 2) {
    throw ValidationError("fit_div needs at least 2 observations");
  }
  const auto set = build_pair_training_set(history, space, sample_cap, cap_seed);
  DivSurrogate surrogate;
  surrogate.bag = fit_boosted_bag(set.x, set.y, params, seed);
  return surrogate;
}

inline double predict_pair(const DivSurrogate& s, const std::vector<double>& enc_a,
                           const std::vector<double>& enc_b) {
  std::vector<double> pair;
  pair.reserve(enc_a.size() + enc_b.size());
  pair.insert(pair.end(), enc_a.begin(), enc_a.end());
  pair.insert(pair.end(), enc_b.begin(), enc_b.end());
  return predict_boosted_bag(s.bag, pair).first;
}

// Diversity acquisition (expected minimum predicted diversity against the
// pool): mean/variance is computed once per (member, candidate) pair, then
// n_samples Gaussian draws per member are reduced by a per-draw minimum.
// Degenerate variances (< 1e-12) pin the draws to the mean.
inline double diversity_acquisition(
    const DivSurrogate& s, const std::vector<std::vector<double>>& pool_encodings,
    const std::vector<double>& candidate_encoding, std::size_t n_samples,
    std::uint64_t seed) {
  if (pool_encodings.empty()) {
    throw ValidationError("diversity_acquisition needs a non-empty pool");
  }
  if (n_samples < 1) throw ValidationError("n_samples must be >= 1");

  const std::size_t dim = candidate_encoding.size();
  std::vector<double> pair(2 * dim);
  std::copy(candidate_encoding.begin(), candidate_encoding.end(),
            pair.begin() + dim);

  std::vector<double> min_per_draw(n_samples,
                                   std::numeric_limits<double>::infinity());
  for (std::size_t m = 0; m < pool_encodings.size(); ++m) {
    if (pool_encodings[m].size() != dim) {
      throw ValidationError("pool encoding width mismatch");
    }
    std::copy(pool_encodings[m].begin(), pool_encodings[m].end(), pair.begin());
    const auto [mean, var] = predict_boosted_bag(s.bag, pair);
    if (var < 1e-12) {
      for (auto& v : min_per_draw) v = std::min(v, mean);
    } else {
      Rng rng(derive_seed(seed, m));
      const double sd = std::sqrt(var);
      for (auto& v : min_per_draw) v = std::min(v, mean + sd * rng.normal());
    }
  }
  // Shifted mean: exact when every draw produced the same minimum.
  const double anchor = min_per_draw.front();
  double shift = 0.0;
  for (const double v : min_per_draw) shift += v - anchor;
  return anchor + shift / static_cast<double>(n_samples);
}

}  // namespace divbo
