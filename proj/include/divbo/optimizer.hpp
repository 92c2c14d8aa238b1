#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "divbo/boosted.hpp"
#include "divbo/config_space.hpp"
#include "divbo/ensemble.hpp"
#include "divbo/error.hpp"
#include "divbo/forest.hpp"
#include "divbo/problem.hpp"
#include "divbo/run_history.hpp"
#include "divbo/surrogates.hpp"

namespace divbo {

enum class Method { RS, BO, DivBOMinus, RS_ES, BO_ES, DivBO };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::RS: return "RS";
    case Method::BO: return "BO";
    case Method::DivBOMinus: return "DivBO-";
    case Method::RS_ES: return "RS-ES";
    case Method::BO_ES: return "BO-ES";
    case Method::DivBO: return "DivBO";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "RS") return Method::RS;
  if (s == "BO") return Method::BO;
  if (s == "DivBO-") return Method::DivBOMinus;
  if (s == "RS-ES") return Method::RS_ES;
  if (s == "BO-ES") return Method::BO_ES;
  if (s == "DivBO") return Method::DivBO;
  throw ValidationError("unknown method '" + s + "'");
}

inline bool uses_surrogates(Method m) {
  return m == Method::BO || m == Method::BO_ES || m == Method::DivBOMinus ||
         m == Method::DivBO;
}
inline bool uses_diversity(Method m) {
  return m == Method::DivBOMinus || m == Method::DivBO;
}
inline bool builds_final_ensemble(Method m) {
  return m == Method::RS_ES || m == Method::BO_ES || m == Method::DivBO;
}

struct DivBOConfig {
  std::size_t budget = 250;
  std::size_t init_random = 5;
  std::size_t n_global_candidates = 4950;
  std::size_t n_local_candidates = 50;
  double beta = 0.05;
  double tau = 0.2;
  std::size_t ensemble_size = 25;
  std::size_t n_div_samples = 10;
  std::uint64_t seed = 0;
  // Surrogate model sizes. The diversity surrogate is refit on |D|^2 pairs
  // every iteration, so its in-loop configuration is kept light; the treereg
  // defaults remain available for offline studies.
  ForestParams perf_params{};
  BagParams div_params{10, BoostedParams{25, 0.1, 3, 0.8, 0.8, 5}};
  // Optional cap on validation samples entering pair-diversity targets.
  std::size_t diversity_sample_cap = 0;
  // Optional wall-clock limit; exceeded mid-run yields a partial history.
  double max_wall_s = std::numeric_limits<double>::infinity();

  void validate() const {
    if (beta < 0.0) throw ValidationError("beta must be >= 0");
    if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
    if (n_global_candidates + n_local_candidates < 1) {
      throw ValidationError("candidate counts must be >= 1");
    }
    if (budget < 1) throw ValidationError("budget must be >= 1");
    if (ensemble_size < 1) throw ValidationError("ensemble_size must be >= 1");
    if (n_div_samples < 1) throw ValidationError("n_div_samples must be >= 1");
  }
};

// Saturating diversity weight: beta * (sigmoid(tau * t) - 0.5), monotone
// non-decreasing in t and bounded by beta / 2.
inline double weight_schedule(double t, double beta, double tau) {
  if (t < 0.0) throw ValidationError("weight_schedule needs t >= 0");
  return beta * (1.0 / (1.0 + std::exp(-tau * t)) - 0.5);
}

// Competition ranks for maximization: rank 1 is the largest value, ties share
// the smallest position in the tied block.
inline std::vector<std::int64_t> rank_values(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("rank_values needs values");
  for (const double v : values) {
    if (std::isnan(v)) throw ValidationError("rank_values got NaN");
  }
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  std::vector<std::int64_t> ranks(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (pos > 0 && values[order[pos]] == values[order[pos - 1]]) {
      ranks[order[pos]] = ranks[order[pos - 1]];
    } else {
      ranks[order[pos]] = static_cast<std::int64_t>(pos) + 1;
    }
  }
  return ranks;
}

// Weighted rank combination: alpha_i = R_perf_i + w * R_div_i. The suggestion
// is the argmin; ties resolve to the lowest candidate index.
inline std::vector<double> combined_acquisition(
    const std::vector<std::int64_t>& rank_perf,
    const std::vector<std::int64_t>& rank_div, double w) {
  if (rank_perf.size() != rank_div.size()) {
    throw ValidationError("rank vectors differ in length");
  }
  std::vector<double> alpha(rank_perf.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    alpha[i] = static_cast<double>(rank_perf[i]) +
               w * static_cast<double>(rank_div[i]);
  }
  return alpha;
}

struct SuggestionDiagnostics {
  double w = 0.0;
  double ei = 0.0;
  double div_acq = std::numeric_limits<double>::quiet_NaN();
  std::int64_t rank_perf = 0;
  std::int64_t rank_div = 0;
  double alpha = 0.0;
  std::vector<std::size_t> pool_members;
  std::size_t n_candidates = 0;
};

struct Suggestion {
  Configuration config;
  SuggestionDiagnostics diag;
};

namespace detail {

struct EncodingKey {
  std::size_t operator()(const std::vector<double>& v) const {
    std::size_t h = 1469598103934665603ULL;
    for (const double d : v) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(d));
      std::memcpy(&bits, &d, sizeof(bits));
      h ^= bits;
      h *= 1099511628211ULL;
    }
    return h;
  }
};

using EncodingSet =
    std::unordered_set<std::vector<double>, EncodingKey>;

}  // namespace detail

// One DivBO suggestion step (Algorithm 1 lines 6-9). `div` may be null when
// the diversity weight is zero; the step then reduces to the pure expected-
// improvement suggestion over the same candidate set.
inline Suggestion suggest(const RunHistory& history, const ConfigSpace& space,
                          const PerfSurrogate& perf, const DivSurrogate* div,
                          const EnsemblePool& pool, const DivBOConfig& cfg,
                          std::uint64_t iteration) {
  const double schedule = weight_schedule(static_cast<double>(history.size()),
                                          cfg.beta, cfg.tau);
  const bool use_div = schedule > 0.0 && div != nullptr && !pool.empty();
  const double w = use_div ? schedule : 0.0;

  // Candidates: global uniform samples plus local perturbations of the best
  // observed configurations.
  std::vector<Configuration> candidates =
      sample_uniform(space, cfg.n_global_candidates,
                     derive_seed(cfg.seed, iteration, 1));
  {
    std::vector<std::pair<Configuration, double>> anchors;
    anchors.reserve(history.size());
    for (const auto& obs : history.observations) {
      anchors.push_back({obs.config, obs.error});
    }
    auto local = sample_local(space, anchors, cfg.n_local_candidates,
                              derive_seed(cfg.seed, iteration, 2));
    candidates.insert(candidates.end(), local.begin(), local.end());
  }

  // Drop candidates identical (post-encoding) to evaluated configurations.
  detail::EncodingSet seen;
  for (const auto& obs : history.observations) {
    seen.insert(space.encode(obs.config));
  }
  std::vector<Configuration> fresh;
  std::vector<std::vector<double>> encodings;
  fresh.reserve(candidates.size());
  encodings.reserve(candidates.size());
  for (auto& cand : candidates) {
    auto enc = space.encode(cand);
    if (seen.count(enc) > 0) continue;
    fresh.push_back(std::move(cand));
    encodings.push_back(std::move(enc));
  }
  if (fresh.empty()) {
    auto fallback =
        sample_uniform(space, 1, derive_seed(cfg.seed, iteration, 7));
    fresh.push_back(fallback.front());
    encodings.push_back(space.encode(fresh.front()));
  }

  const std::size_t n = fresh.size();
  std::vector<double> ei(n, 0.0);
  detail::parallel_for(n, [&](std::size_t i) {
    ei[i] = expected_improvement_at(perf, encodings[i]);
  });
  const auto rank_perf = rank_values(ei);

  std::vector<double> div_acq(n, 0.0);
  std::vector<std::int64_t> rank_div(n, 0);
  if (use_div) {
    std::vector<std::vector<double>> pool_encodings;
    for (const std::size_t idx : pool.unique_members()) {
      pool_encodings.push_back(space.encode(history.at(idx).config));
    }
    const std::uint64_t acq_seed = derive_seed(cfg.seed, iteration, 5);
    detail::parallel_for(n, [&](std::size_t i) {
      div_acq[i] = diversity_acquisition(*div, pool_encodings, encodings[i],
                                         cfg.n_div_samples,
                                         derive_seed(acq_seed, i));
    });
    rank_div = rank_values(div_acq);
  }

  const auto alpha = use_div ? combined_acquisition(rank_perf, rank_div, w)
                             : combined_acquisition(rank_perf, rank_perf, 0.0);
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (alpha[i] < alpha[best]) best = i;
  }

  Suggestion out;
  out.config = fresh[best];
  out.diag.w = w;
  out.diag.ei = ei[best];
  out.diag.div_acq = use_div ? div_acq[best]
                             : std::numeric_limits<double>::quiet_NaN();
  out.diag.rank_perf = rank_perf[best];
  out.diag.rank_div = use_div ? rank_div[best] : 0;
  out.diag.alpha = alpha[best];
  out.diag.pool_members = pool.members;
  out.diag.n_candidates = n;
  return out;
}

struct IterationRecord {
  std::size_t iteration = 0;
  Configuration config;
  double error = 1.0;
  EvalStatus status = EvalStatus::Ok;
  double w = 0.0;
  // Ground-truth Eq. 3 diversity between the suggestion and the nearest
  // member of the temporary pool built before this evaluation; NaN while the
  // pool does not exist yet.
  double min_diversity = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> pool_members;
  double ensemble_val_error = std::numeric_limits<double>::quiet_NaN();
  bool pool_changed = false;
};

struct RunResult {
  Method method = Method::RS;
  RunHistory history;
  std::vector<IterationRecord> records;
  EnsemblePool final_pool;  // empty for RS / BO / DivBO-
  std::size_t best_single_index = 0;
  double final_val_error = std::numeric_limits<double>::quiet_NaN();
  double final_test_error = std::numeric_limits<double>::quiet_NaN();
  bool partial = false;
  double wall_time_s = 0.0;
  std::vector<PredictionMatrix> test_predictions;  // empty if no test split
};

// Full optimization loop. The first `init_random` iterations are random for
// every method; afterwards RS keeps sampling, BO follows expected
// improvement, and DivBO adds the rank-combined diversity acquisition against
// the temporary pool. A temporary pool is rebuilt every iteration for all
// methods so the diversity diagnostics stay comparable across them.
inline RunResult run(Method method, const Problem& problem,
                     const DivBOConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const ConfigSpace& space = problem.space();
  const auto& val_labels = problem.val_labels();

  RunResult result;
  result.method = method;
  std::vector<PredictionMatrix> preds;
  preds.reserve(cfg.budget);
  bool all_test = problem.test_labels() != nullptr;

  EnsemblePool previous_pool;

  for (std::size_t t = 0; t < cfg.budget; ++t) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (elapsed > cfg.max_wall_s) {
      result.partial = true;
      break;
    }

    // Temporary pool from the observations so far (the ensemble that a
    // post-hoc strategy ending at the previous iteration would output).
    EnsemblePool pool;
    double pool_error = std::numeric_limits<double>::quiet_NaN();
    if (!preds.empty()) {
      pool = ensemble_selection(preds, val_labels, cfg.ensemble_size);
      pool_error =
          classification_error(ensemble_predict(preds, pool), val_labels);
    }

    IterationRecord record;
    record.iteration = t;
    record.pool_members = pool.members;
    record.ensemble_val_error = pool_error;
    if (t >= 2 && !pool.empty() && !previous_pool.empty()) {
      record.pool_changed = !pool.same_multiset(previous_pool);
    }

    Configuration config;
    if (t < cfg.init_random || !uses_surrogates(method)) {
      config = sample_uniform(space, 1, derive_seed(cfg.seed, t, 0)).front();
    } else {
      const PerfSurrogate perf =
          fit_perf(result.history, space, cfg.perf_params,
                   derive_seed(cfg.seed, t, 3));
      std::optional<DivSurrogate> div;
      const double schedule = weight_schedule(
          static_cast<double>(result.history.size()), cfg.beta, cfg.tau);
      if (uses_diversity(method) && schedule > 0.0 && !pool.empty()) {
        div = fit_div(result.history, space, cfg.div_params,
                      derive_seed(cfg.seed, t, 4), cfg.diversity_sample_cap,
                      derive_seed(cfg.seed, t, 8));
      }
      Suggestion s = suggest(result.history, space, perf,
                             div ? &*div : nullptr, pool, cfg, t);
      config = std::move(s.config);
      record.w = s.diag.w;
    }

    // Evaluate; failures are recorded with the penalty error and uniform
    // predictions so the run continues.
    Observation obs;
    obs.config = config;
    const auto eval_start = std::chrono::steady_clock::now();
    try {
      EvalOutcome outcome = problem.evaluate(config, derive_seed(cfg.seed, t, 6));
      outcome.val_predictions.check_row_stochastic();
      obs.predictions = std::move(outcome.val_predictions);
      obs.error = outcome.val_error;
      obs.status = outcome.status;
      if (outcome.status != EvalStatus::Ok) {
        obs.error = 1.0;
        obs.predictions =
            PredictionMatrix::uniform(val_labels.size(), problem.n_classes());
      }
      if (all_test && outcome.has_test) {
        result.test_predictions.push_back(std::move(outcome.test_predictions));
      } else {
        all_test = false;
      }
    } catch (const std::exception&) {
      obs.status = EvalStatus::Failed;
      obs.error = 1.0;
      obs.predictions =
          PredictionMatrix::uniform(val_labels.size(), problem.n_classes());
      if (all_test) {
        result.test_predictions.push_back(PredictionMatrix::uniform(
            problem.test_labels()->size(), problem.n_classes()));
      }
    }
    obs.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      eval_start)
            .count();

    record.config = obs.config;
    record.error = obs.error;
    record.status = obs.status;
    if (!pool.empty()) {
      record.min_diversity =
          min_diversity_to_pool(preds, pool, obs.predictions);
    }

    preds.push_back(obs.predictions);
    result.history.append(std::move(obs));
    result.records.push_back(std::move(record));
    previous_pool = std::move(pool);
  }

  if (result.history.empty()) {
    throw ValidationError("run produced no observations");
  }
  result.best_single_index = result.history.best_index();

  if (builds_final_ensemble(method)) {
    result.final_pool = ensemble_selection(preds, val_labels, cfg.ensemble_size);
    result.final_val_error = classification_error(
        ensemble_predict(preds, result.final_pool), val_labels);
    if (all_test && problem.test_labels() != nullptr &&
        result.test_predictions.size() == preds.size()) {
      result.final_test_error = classification_error(
          ensemble_predict(result.test_predictions, result.final_pool),
          *problem.test_labels());
    }
  } else {
    result.final_val_error = result.history.at(result.best_single_index).error;
    if (all_test && problem.test_labels() != nullptr &&
        result.test_predictions.size() == preds.size()) {
      result.final_test_error = classification_error(
          result.test_predictions[result.best_single_index],
          *problem.test_labels());
    }
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

// Count of trailing-window iterations whose temporary pool both changed and
// strictly improved its validation error.
inline std::size_t effective_pool_updates(
    const std::vector<IterationRecord>& records, std::size_t window) {
  const std::size_t n = records.size();
  const std::size_t w = std::min(window, n);
  std::size_t count = 0;
  for (std::size_t i = n - w; i < n; ++i) {
    if (i == 0) continue;
    const auto& cur = records[i];
    const auto& prev = records[i - 1];
    if (std::isnan(cur.ensemble_val_error) ||
        std::isnan(prev.ensemble_val_error)) {
      continue;
    }
    if (cur.pool_changed && cur.ensemble_val_error < prev.ensemble_val_error) {
      ++count;
    }
  }
  return count;
}

}  // namespace divbo
