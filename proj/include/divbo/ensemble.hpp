#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "divbo/error.hpp"
#include "divbo/rng.hpp"

namespace divbo {

// Row-stochastic class-probability predictions of one learner on the
// validation set. Stored as 32-bit floats, row-major.
struct PredictionMatrix {
  std::vector<float> values;
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;

  PredictionMatrix() = default;
  PredictionMatrix(std::size_t samples, std::size_t classes)
      : values(samples * classes, 0.0f), n_samples(samples), n_classes(classes) {}

  static PredictionMatrix uniform(std::size_t samples, std::size_t classes) {
    PredictionMatrix m(samples, classes);
    const float p = 1.0f / static_cast<float>(classes);
    std::fill(m.values.begin(), m.values.end(), p);
    return m;
  }

  float at(std::size_t row, std::size_t col) const {
    return values[row * n_classes + col];
  }
  float& at(std::size_t row, std::size_t col) {
    return values[row * n_classes + col];
  }
  const float* row(std::size_t r) const { return values.data() + r * n_classes; }

  bool same_shape(const PredictionMatrix& other) const {
    return n_samples == other.n_samples && n_classes == other.n_classes;
  }

  // Rows must sum to 1 within 1e-4 with entries in [0, 1].
  void check_row_stochastic() const {
    for (std::size_t s = 0; s < n_samples; ++s) {
      double sum = 0.0;
      for (std::size_t c = 0; c < n_classes; ++c) {
        const float v = at(s, c);
        if (!(v >= 0.0f && v <= 1.0f)) {
          throw ValidationError("prediction entry outside [0, 1]");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-4) {
        throw ValidationError("prediction row does not sum to 1");
      }
    }
  }

  // Predicted label per row; argmax ties broken toward the lowest class.
  std::size_t argmax_row(std::size_t r) const {
    const float* p = row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
      if (p[c] > p[best]) best = c;
    }
    return best;
  }
};

// Ordered multiset of observation indices selected into an ensemble.
struct EnsemblePool {
  std::vector<std::size_t> members;

  bool empty() const { return members.empty(); }
  std::size_t size() const { return members.size(); }

  std::vector<std::size_t> unique_members() const {
    std::vector<std::size_t> unique = members;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    return unique;
  }

  // Multiset equality, independent of selection order.
  bool same_multiset(const EnsemblePool& other) const {
    std::vector<std::size_t> a = members;
    std::vector<std::size_t> b = other.members;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
  }
};

namespace detail {
inline void check_same_shape(const PredictionMatrix& p,
                             const PredictionMatrix& q) {
  if (!p.same_shape(q)) {
    throw ValidationError("prediction matrices have different shapes");
  }
}
}  // namespace detail

// Pairwise diversity: scaled average Euclidean distance of class-probability
// rows. Each row contributes sqrt(||p_s - q_s||^2 / 2), so the result lies in
// [0, 1], is symmetric, and is exactly 0 for identical matrices and exactly 1
// for fully opposed one-hot rows.
inline double diversity(const PredictionMatrix& p, const PredictionMatrix& q) {
  detail::check_same_shape(p, q);
  double total = 0.0;
  for (std::size_t s = 0; s < p.n_samples; ++s) {
    const float* pr = p.row(s);
    const float* qr = q.row(s);
    double sumsq = 0.0;
    for (std::size_t c = 0; c < p.n_classes; ++c) {
      const double d = static_cast<double>(pr[c]) - static_cast<double>(qr[c]);
      sumsq += d * d;
    }
    total += std::sqrt(sumsq * 0.5);
  }
  return total / static_cast<double>(p.n_samples);
}

// Same measure restricted to a subset of sample rows.
inline double diversity_on_subset(const PredictionMatrix& p,
                                  const PredictionMatrix& q,
                                  const std::vector<std::size_t>& rows) {
  detail::check_same_shape(p, q);
  if (rows.empty()) throw ValidationError("subset diversity needs rows");
  double total = 0.0;
  for (const std::size_t s : rows) {
    const float* pr = p.row(s);
    const float* qr = q.row(s);
    double sumsq = 0.0;
    for (std::size_t c = 0; c < p.n_classes; ++c) {
      const double d = static_cast<double>(pr[c]) - static_cast<double>(qr[c]);
      sumsq += d * d;
    }
    total += std::sqrt(sumsq * 0.5);
  }
  return total / static_cast<double>(rows.size());
}

// First `cap` positions of a seeded shuffle of [0, n); used to bound the
// validation samples entering diversity computations on large sets.
inline std::vector<std::size_t> subset_indices(std::size_t n, std::size_t cap,
                                               std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (cap >= n) return idx;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(cap);
  return idx;
}

// Fraction of rows whose predicted label differs from the given label.
inline double classification_error(const PredictionMatrix& p,
                                   const std::vector<std::size_t>& labels) {
  if (labels.size() != p.n_samples) {
    throw ValidationError("label count does not match prediction rows");
  }
  std::size_t wrong = 0;
  for (std::size_t s = 0; s < p.n_samples; ++s) {
    if (labels[s] >= p.n_classes) {
      throw ValidationError("label out of range");
    }
    if (p.argmax_row(s) != labels[s]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(p.n_samples);
}

// Uniform-weight ensemble prediction: the arithmetic mean of the member
// matrices, multiplicity counted, accumulated in double precision in pool
// order and rounded to 32-bit once at the end.
inline PredictionMatrix ensemble_predict(
    const std::vector<PredictionMatrix>& predictions, const EnsemblePool& pool) {
  if (pool.empty()) throw ValidationError("ensemble_predict needs a non-empty pool");
  const PredictionMatrix& first = predictions.at(pool.members.front());
  std::vector<double> acc(first.values.size(), 0.0);
  for (const std::size_t idx : pool.members) {
    const PredictionMatrix& m = predictions.at(idx);
    detail::check_same_shape(first, m);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc[i] += static_cast<double>(m.values[i]);
    }
  }
  PredictionMatrix out(first.n_samples, first.n_classes);
  const double inv = 1.0 / static_cast<double>(pool.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    out.values[i] = static_cast<float>(acc[i] * inv);
  }
  return out;
}

// Greedy forward selection with replacement: E rounds, each adding the
// observation that minimizes the ensemble validation error, ties broken
// toward the earliest observation index.
inline EnsemblePool ensemble_selection(
    const std::vector<PredictionMatrix>& predictions,
    const std::vector<std::size_t>& labels, std::size_t ensemble_size) {
  if (predictions.empty()) {
    throw ValidationError("ensemble_selection needs observations");
  }
  if (ensemble_size < 1) throw ValidationError("ensemble size must be >= 1");
  const PredictionMatrix& first = predictions.front();
  for (const auto& m : predictions) detail::check_same_shape(first, m);
  if (labels.size() != first.n_samples) {
    throw ValidationError("label count does not match prediction rows");
  }

  const std::size_t n_cells = first.values.size();
  std::vector<double> sum(n_cells, 0.0);
  EnsemblePool pool;

  for (std::size_t round = 0; round < ensemble_size; ++round) {
    double best_error = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    const double inv = 1.0 / static_cast<double>(round + 1);
    for (std::size_t cand = 0; cand < predictions.size(); ++cand) {
      const auto& m = predictions[cand];
      std::size_t wrong = 0;
      for (std::size_t s = 0; s < first.n_samples; ++s) {
        const double* acc_row = sum.data() + s * first.n_classes;
        const float* cand_row = m.row(s);
        std::size_t best_class = 0;
        double best_p = -1.0;
        for (std::size_t c = 0; c < first.n_classes; ++c) {
          const double p = (acc_row[c] + static_cast<double>(cand_row[c])) * inv;
          if (p > best_p) {
            best_p = p;
            best_class = c;
          }
        }
        if (labels[s] >= first.n_classes) {
          throw ValidationError("label out of range");
        }
        if (best_class != labels[s]) ++wrong;
      }
      const double error =
          static_cast<double>(wrong) / static_cast<double>(first.n_samples);
      if (error < best_error) {
        best_error = error;
        best_idx = cand;
      }
    }
    pool.members.push_back(best_idx);
    const auto& chosen = predictions[best_idx];
    for (std::size_t i = 0; i < n_cells; ++i) {
      sum[i] += static_cast<double>(chosen.values[i]);
    }
  }
  return pool;
}

// Ground-truth minimum diversity between a candidate and the unique members
// of a pool, from stored prediction matrices.
inline double min_diversity_to_pool(
    const std::vector<PredictionMatrix>& predictions, const EnsemblePool& pool,
    const PredictionMatrix& candidate) {
  if (pool.empty()) {
    throw ValidationError("min_diversity_to_pool needs a non-empty pool");
  }
  double best = std::numeric_limits<double>::infinity();
  for (const std::size_t idx : pool.unique_members()) {
    best = std::min(best, diversity(predictions.at(idx), candidate));
  }
  return best;
}

inline double min_diversity_to_pool(
    const std::vector<PredictionMatrix>& predictions, const EnsemblePool& pool,
    std::size_t candidate_index) {
  return min_diversity_to_pool(predictions, pool, predictions.at(candidate_index));
}

// Fraction of samples on which the two learners predict different labels.
inline double pairwise_disagreement(const PredictionMatrix& p,
                                    const PredictionMatrix& q) {
  detail::check_same_shape(p, q);
  std::size_t differ = 0;
  for (std::size_t s = 0; s < p.n_samples; ++s) {
    if (p.argmax_row(s) != q.argmax_row(s)) ++differ;
  }
  return static_cast<double>(differ) / static_cast<double>(p.n_samples);
}

}  // namespace divbo
