#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "divbo/dataset.hpp"
#include "divbo/ensemble.hpp"
#include "divbo/optimizer.hpp"
#include "divbo/run_io.hpp"
#include "divbo/stats.hpp"
#include "divbo/surrogates.hpp"

namespace divbo {

// ---------------------------------------------------------------------------
// Surrogate-evaluation experiment: fit both surrogates on growing prefixes of
// a random configuration sample and report Kendall tau against ground truth
// on a held-out tail.
// ---------------------------------------------------------------------------

struct SurrogateEvalPoint {
  std::size_t n_fitted = 0;
  double div_tau = 0.0;
  bool div_defined = false;
  double perf_tau = 0.0;
  bool perf_defined = false;
};

struct SurrogateEvalParams {
  std::size_t n_configs = 300;
  std::size_t n_test_configs = 50;
  std::size_t n_test_pairs = 50;
  std::vector<std::size_t> checkpoints{50, 100, 150, 200, 250};
  BagParams div_params{10, BoostedParams{50, 0.1, 5, 0.8, 0.8, 10}};
  ForestParams perf_params{};
};

inline std::vector<SurrogateEvalPoint> surrogate_eval_experiment(
    const Problem& problem, const SurrogateEvalParams& params,
    std::uint64_t seed) {
  const ConfigSpace& space = problem.space();
  if (params.n_configs <= params.n_test_configs) {
    throw ValidationError("n_configs must exceed n_test_configs");
  }
  const auto configs =
      sample_uniform(space, params.n_configs, derive_seed(seed, 1));

  RunHistory history;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    EvalOutcome outcome = problem.evaluate(configs[i], derive_seed(seed, 2, i));
    Observation obs;
    obs.config = configs[i];
    obs.error = outcome.val_error;
    obs.predictions = std::move(outcome.val_predictions);
    history.append(std::move(obs));
  }

  const std::size_t n_fit_max = params.n_configs - params.n_test_configs;
  const std::size_t test_begin = n_fit_max;

  std::vector<SurrogateEvalPoint> curve;
  for (const std::size_t k : params.checkpoints) {
    if (k < 2 || k > n_fit_max) {
      throw ValidationError("checkpoint outside the fitted range");
    }
    SurrogateEvalPoint point;
    point.n_fitted = k;

    RunHistory prefix;
    for (std::size_t i = 0; i < k; ++i) prefix.append(history.at(i));

    // Diversity surrogate: held-out pairs (test config, fitted config).
    const DivSurrogate div =
        fit_div(prefix, space, params.div_params, derive_seed(seed, 3, k));
    Rng pair_rng(derive_seed(seed, 4, k));
    std::vector<double> predicted;
    std::vector<double> truth;
    for (std::size_t i = 0; i < params.n_test_pairs; ++i) {
      const std::size_t ti = test_begin + (i % params.n_test_configs);
      const std::size_t fj = pair_rng.index(k);
      predicted.push_back(predict_pair(div,
                                       space.encode(history.at(ti).config),
                                       space.encode(history.at(fj).config)));
      truth.push_back(
          diversity(history.at(ti).predictions, history.at(fj).predictions));
    }
    if (const auto tau = kendall_tau(predicted, truth)) {
      point.div_tau = *tau;
      point.div_defined = true;
    }

    // Performance surrogate: held-out single configurations.
    const PerfSurrogate perf =
        fit_perf(prefix, space, params.perf_params, derive_seed(seed, 5, k));
    std::vector<double> perf_pred;
    std::vector<double> perf_truth;
    for (std::size_t i = 0; i < params.n_test_configs; ++i) {
      const std::size_t ti = test_begin + i;
      const auto enc = space.encode(history.at(ti).config);
      perf_pred.push_back(predict_forest(perf.model, enc).first);
      perf_truth.push_back(history.at(ti).error);
    }
    if (const auto tau = kendall_tau(perf_pred, perf_truth)) {
      point.perf_tau = *tau;
      point.perf_defined = true;
    }
    curve.push_back(point);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Cross-product experiment harness.
// ---------------------------------------------------------------------------

struct RunSummary {
  std::string problem;
  Method method = Method::RS;
  std::uint64_t seed = 0;
  std::string dir;
  bool ok = false;
  std::string error_message;

  std::vector<double> best_val_trace;  // cumulative best observed error
  std::vector<double> min_div_trace;   // NaN where undefined
  std::vector<double> ensemble_val_trace;
  double final_val_error = std::numeric_limits<double>::quiet_NaN();
  double final_test_error = std::numeric_limits<double>::quiet_NaN();
  double best_single_val_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t effective_updates_last_third = 0;
  double avg_pool_member_error = std::numeric_limits<double>::quiet_NaN();
  double avg_pool_disagreement = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
  std::vector<RunSummary> runs;
  std::vector<std::string> problems;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  std::size_t budget = 0;
};

using ProblemFactory = std::function<std::unique_ptr<Problem>()>;

namespace detail {

inline std::string sanitize_component(std::string s) {
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' &&
        ch != '.') {
      ch = '_';
    }
  }
  return s;
}

inline RunSummary summarize_run(const RunResult& result,
                                const std::string& problem_name,
                                std::uint64_t seed, const std::string& dir) {
  RunSummary s;
  s.problem = problem_name;
  s.method = result.method;
  s.seed = seed;
  s.dir = dir;
  s.ok = true;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& record : result.records) {
    best = std::min(best, record.error);
    s.best_val_trace.push_back(best);
    s.min_div_trace.push_back(record.min_diversity);
    s.ensemble_val_trace.push_back(record.ensemble_val_error);
  }
  s.final_val_error = result.final_val_error;
  s.final_test_error = result.final_test_error;
  s.best_single_val_error = result.history.at(result.best_single_index).error;
  s.effective_updates_last_third = effective_pool_updates(
      result.records, std::max<std::size_t>(1, result.records.size() / 3));

  if (!result.final_pool.empty()) {
    const auto unique = result.final_pool.unique_members();
    double err = 0.0;
    for (const std::size_t idx : unique) err += result.history.at(idx).error;
    s.avg_pool_member_error = err / static_cast<double>(unique.size());
    if (unique.size() >= 2) {
      double dis = 0.0;
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < unique.size(); ++i) {
        for (std::size_t j = i + 1; j < unique.size(); ++j) {
          dis += pairwise_disagreement(result.history.at(unique[i]).predictions,
                                       result.history.at(unique[j]).predictions);
          ++pairs;
        }
      }
      s.avg_pool_disagreement = dis / static_cast<double>(pairs);
    }
  }
  return s;
}

}  // namespace detail

// Runs the (problem x method x seed) cross product, each run in its own
// directory under out_dir; failed cells are recorded, not fatal.
inline ExperimentReport run_experiment(
    const std::vector<std::pair<std::string, ProblemFactory>>& problems,
    const std::vector<Method>& methods, const std::vector<std::uint64_t>& seeds,
    const DivBOConfig& base_cfg, const std::string& out_dir,
    std::size_t jobs = 1) {
  if (problems.empty() || methods.empty() || seeds.empty()) {
    throw ValidationError("run_experiment needs problems, methods and seeds");
  }
  namespace fs = std::filesystem;

  struct Cell {
    std::size_t problem_idx;
    Method method;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (const Method m : methods) {
      for (const std::uint64_t s : seeds) cells.push_back({p, m, s});
    }
  }

  ExperimentReport report;
  report.runs.resize(cells.size());
  for (const auto& [name, factory] : problems) report.problems.push_back(name);
  report.methods = methods;
  report.seeds = seeds;
  report.budget = base_cfg.budget;

  std::atomic<std::size_t> next{0};
  const std::size_t n_workers = std::max<std::size_t>(1, jobs);
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const auto& [problem_name, factory] = problems[cell.problem_idx];
      const std::string dir =
          (fs::path(out_dir) / detail::sanitize_component(problem_name) /
           detail::sanitize_component(to_string(cell.method)) /
           ("seed" + std::to_string(cell.seed)))
              .string();
      RunSummary& summary = report.runs[i];
      try {
        const auto problem = factory();
        DivBOConfig cfg = base_cfg;
        cfg.seed = cell.seed;
        const RunResult result = run(cell.method, *problem, cfg);
        write_run_dir(dir, result, cfg, problem->name());
        summary = detail::summarize_run(result, problem_name, cell.seed, dir);
      } catch (const std::exception& err) {
        summary.problem = problem_name;
        summary.method = cell.method;
        summary.seed = cell.seed;
        summary.dir = dir;
        summary.ok = false;
        summary.error_message = err.what();
      }
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return report;
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double total = 0.0;
  for (const double x : v) total += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                   : total / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double total = 0.0;
  for (const double x : v) total += (x - m) * (x - m);
  return std::sqrt(total / static_cast<double>(v.size()));
}

// Fractional (average) ranks, 1 = smallest value; tied values share the mean
// of their positions so the ranks always sum to m(m+1)/2.
inline std::vector<double> fractional_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Emits report.json, ranks.csv and traces.csv. Aggregates are recomputed from
// the per-run rows carried in the report.
inline void emit_report(const ExperimentReport& report, const std::string& dir,
                        Method baseline = Method::BO_ES) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  auto runs_for = [&](const std::string& problem, Method method) {
    std::vector<const RunSummary*> out;
    for (const auto& run : report.runs) {
      if (run.ok && run.problem == problem && run.method == method) {
        out.push_back(&run);
      }
    }
    return out;
  };

  // ranks.csv: per-iteration fractional validation ranks of the methods'
  // mean best-observed errors, averaged over problems.
  {
    std::ofstream out(fs::path(dir) / "ranks.csv");
    out << "iteration,method,mean_rank\n";
    for (std::size_t it = 0; it < report.budget; ++it) {
      std::vector<std::vector<double>> rank_sums(report.methods.size());
      for (const auto& problem : report.problems) {
        std::vector<double> means;
        bool complete = true;
        for (const Method m : report.methods) {
          std::vector<double> vals;
          for (const auto* run : runs_for(problem, m)) {
            if (it < run->best_val_trace.size()) {
              vals.push_back(run->best_val_trace[it]);
            }
          }
          if (vals.empty()) {
            complete = false;
            break;
          }
          means.push_back(detail::mean_of(vals));
        }
        if (!complete) continue;
        const auto ranks = detail::fractional_ranks(means);
        for (std::size_t m = 0; m < report.methods.size(); ++m) {
          rank_sums[m].push_back(ranks[m]);
        }
      }
      for (std::size_t m = 0; m < report.methods.size(); ++m) {
        if (rank_sums[m].empty()) continue;
        out << it << "," << to_string(report.methods[m]) << ","
            << detail::mean_of(rank_sums[m]) << "\n";
      }
    }
  }

  // traces.csv: per problem/iteration/method mean best error and mean
  // min-diversity across seeds.
  {
    std::ofstream out(fs::path(dir) / "traces.csv");
    out << "problem,iteration,method,mean_error,mean_min_diversity\n";
    for (const auto& problem : report.problems) {
      for (std::size_t it = 0; it < report.budget; ++it) {
        for (const Method m : report.methods) {
          std::vector<double> errs;
          std::vector<double> divs;
          for (const auto* run : runs_for(problem, m)) {
            if (it < run->best_val_trace.size()) {
              errs.push_back(run->best_val_trace[it]);
              const double d = run->min_div_trace[it];
              if (!std::isnan(d)) divs.push_back(d);
            }
          }
          if (errs.empty()) continue;
          out << problem << "," << it << "," << to_string(m) << ","
              << detail::mean_of(errs) << ",";
          if (!divs.empty()) out << detail::mean_of(divs);
          out << "\n";
        }
      }
    }
  }

  // report.json: per-cell aggregates plus significance verdicts against the
  // baseline method.
  {
    json j;
    j["budget"] = report.budget;
    json methods = json::array();
    for (const Method m : report.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
    j["problems"] = report.problems;
    json cells = json::array();
    for (const auto& problem : report.problems) {
      for (const Method m : report.methods) {
        const auto runs = runs_for(problem, m);
        json cell;
        cell["problem"] = problem;
        cell["method"] = to_string(m);
        cell["n_runs"] = runs.size();
        if (!runs.empty()) {
          std::vector<double> final_val;
          std::vector<double> final_test;
          std::vector<double> pool_err;
          std::vector<double> disagreement;
          std::vector<double> updates;
          json raw = json::array();
          for (const auto* run : runs) {
            json r;
            r["seed"] = run->seed;
            r["dir"] = run->dir;
            r["final_val_error"] = run->final_val_error;
            if (!std::isnan(run->final_test_error)) {
              r["final_test_error"] = run->final_test_error;
            }
            r["best_single_val_error"] = run->best_single_val_error;
            r["effective_updates_last_third"] =
                run->effective_updates_last_third;
            raw.push_back(r);
            final_val.push_back(run->final_val_error);
            if (!std::isnan(run->final_test_error)) {
              final_test.push_back(run->final_test_error);
            }
            if (!std::isnan(run->avg_pool_member_error)) {
              pool_err.push_back(run->avg_pool_member_error);
            }
            if (!std::isnan(run->avg_pool_disagreement)) {
              disagreement.push_back(run->avg_pool_disagreement);
            }
            updates.push_back(
                static_cast<double>(run->effective_updates_last_third));
          }
          cell["runs"] = raw;
          cell["final_val_mean"] = detail::mean_of(final_val);
          cell["final_val_std"] = detail::stddev_of(final_val);
          if (!final_test.empty()) {
            cell["final_test_mean"] = detail::mean_of(final_test);
            cell["final_test_std"] = detail::stddev_of(final_test);
          }
          if (!pool_err.empty()) {
            cell["avg_pool_member_error"] = detail::mean_of(pool_err);
          }
          if (!disagreement.empty()) {
            cell["avg_pool_disagreement"] = detail::mean_of(disagreement);
          }
          cell["mean_effective_updates_last_third"] = detail::mean_of(updates);

          // Paired significance vs the baseline on final validation errors.
          if (m != baseline) {
            const auto base_runs = runs_for(problem, baseline);
            std::vector<double> mine;
            std::vector<double> theirs;
            for (const auto* run : runs) {
              for (const auto* other : base_runs) {
                if (other->seed == run->seed) {
                  mine.push_back(run->final_val_error);
                  theirs.push_back(other->final_val_error);
                }
              }
            }
            if (mine.size() >= 2) {
              const auto w = wilcoxon_signed_rank(mine, theirs);
              cell["vs_baseline"] = {{"baseline", to_string(baseline)},
                                     {"p_value", w.p_value},
                                     {"verdict", to_string(w.verdict)}};
            }
          }
        }
        cells.push_back(cell);
      }
    }
    j["cells"] = cells;
    std::ofstream out(fs::path(dir) / "report.json");
    out << j.dump(2) << "\n";
  }
}

// Rebuilds run summaries from persisted run directories (the raw rows), so
// reports can be regenerated without rerunning anything.
inline RunSummary load_run_summary(const std::string& dir,
                                   const std::string& problem_name,
                                   Method method, std::uint64_t seed) {
  namespace fs = std::filesystem;
  RunSummary s;
  s.problem = problem_name;
  s.method = method;
  s.seed = seed;
  s.dir = dir;

  const auto records = read_history_jsonl((fs::path(dir) / "history.jsonl").string());
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> errors;
  for (const auto& r : records) {
    best = std::min(best, r.error);
    s.best_val_trace.push_back(best);
    s.min_div_trace.push_back(r.min_diversity);
    s.ensemble_val_trace.push_back(r.ensemble_val_error);
    errors.push_back(r.error);
  }

  std::ifstream res_in(fs::path(dir) / "result.json");
  if (!res_in) throw ValidationError("missing result.json in '" + dir + "'");
  json res;
  res_in >> res;
  s.final_val_error = res.at("final_val_error").get<double>();
  if (!res.at("final_test_error").is_null()) {
    s.final_test_error = res.at("final_test_error").get<double>();
  }
  s.best_single_val_error = res.at("best_single_val_error").get<double>();

  // Effective updates recomputed from the trace.
  std::vector<IterationRecord> recs(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    recs[i].ensemble_val_error = records[i].ensemble_val_error;
    recs[i].pool_changed =
        i > 0 && !records[i - 1].pool_members.empty() &&
        !EnsemblePool{records[i].pool_members}.same_multiset(
            EnsemblePool{records[i - 1].pool_members});
  }
  s.effective_updates_last_third = effective_pool_updates(
      recs, std::max<std::size_t>(1, recs.size() / 3));

  const auto pool = res.at("final_pool").get<std::vector<std::size_t>>();
  if (!pool.empty()) {
    EnsemblePool p{pool};
    const auto unique = p.unique_members();
    double err = 0.0;
    for (const std::size_t idx : unique) err += errors.at(idx);
    s.avg_pool_member_error = err / static_cast<double>(unique.size());
    if (unique.size() >= 2) {
      double dis = 0.0;
      std::size_t pairs = 0;
      std::vector<PredictionMatrix> matrices;
      for (const std::size_t idx : unique) {
        matrices.push_back(load_prediction_matrix(
            (fs::path(dir) / "preds" / std::to_string(idx)).string()));
      }
      for (std::size_t i = 0; i < matrices.size(); ++i) {
        for (std::size_t j = i + 1; j < matrices.size(); ++j) {
          dis += pairwise_disagreement(matrices[i], matrices[j]);
          ++pairs;
        }
      }
      s.avg_pool_disagreement = dis / static_cast<double>(pairs);
    }
  }
  s.ok = true;
  return s;
}

}  // namespace divbo
