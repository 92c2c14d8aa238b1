#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "divbo/learners.hpp"
#include "divbo/surrogates.hpp"
#include "divbo/synthetic.hpp"

using namespace divbo;

namespace {

PredictionMatrix one_hot_rows(std::size_t samples, std::size_t hot) {
  PredictionMatrix m(samples, 2);
  for (std::size_t s = 0; s < samples; ++s) m.at(s, hot) = 1.0f;
  return m;
}

RunHistory synthetic_history(const SyntheticProblem& problem, std::size_t n,
                             std::uint64_t seed) {
  RunHistory history;
  for (const auto& config : sample_uniform(problem.space(), n, seed)) {
    auto [matrix, error] = synthetic_eval(problem, config);
    Observation obs;
    obs.config = config;
    obs.error = error;
    obs.predictions = std::move(matrix);
    history.append(std::move(obs));
  }
  return history;
}

}  // namespace

TEST_CASE("fit_perf on a single observation") {
  const ConfigSpace space = builtin_space();
  RunHistory history;
  Observation obs;
  obs.config = sample_uniform(space, 1, 3).front();
  obs.error = 0.3;
  obs.predictions = one_hot_rows(4, 0);
  history.append(obs);

  const auto surrogate = fit_perf(history, space, ForestParams{}, 1);
  REQUIRE(surrogate.y_best == 0.3);
  const auto probe = sample_uniform(space, 5, 9);
  for (const auto& c : probe) {
    const auto [mean, var] = predict_forest(surrogate.model, space.encode(c));
    REQUIRE(mean == 0.3);
    REQUIRE(var == 0.0);
  }
}

TEST_CASE("fit_perf tracks the exact minimum") {
  const ConfigSpace space = builtin_space();
  RunHistory history;
  Rng rng(5);
  double min_error = 1.0;
  for (const auto& config : sample_uniform(space, 50, 12)) {
    Observation obs;
    obs.config = config;
    obs.error = rng.uniform(0.05, 0.9);
    obs.predictions = one_hot_rows(3, rng.index(2));
    min_error = std::min(min_error, obs.error);
    history.append(obs);
  }
  const auto surrogate = fit_perf(history, space, ForestParams{}, 4);
  REQUIRE(surrogate.y_best == min_error);
  REQUIRE_THROWS_AS(fit_perf(RunHistory{}, space, ForestParams{}, 0),
                    ValidationError);
}

TEST_CASE("duplicated observations interpolate with zero variance") {
  const ConfigSpace space = builtin_space();
  RunHistory history;
  const auto configs = sample_uniform(space, 6, 21);
  Rng rng(2);
  for (const auto& config : configs) {
    Observation obs;
    obs.config = config;
    obs.error = rng.uniform(0.1, 0.9);
    obs.predictions = one_hot_rows(2, 0);
    history.append(obs);
  }
  // Duplicate the first configuration with the identical error.
  Observation dup;
  dup.config = configs[0];
  dup.error = history.at(0).error;
  dup.predictions = one_hot_rows(2, 0);
  history.append(dup);

  ForestParams params;
  params.bootstrap = false;
  params.feature_fraction = 1.0;
  params.min_samples_leaf = 1;
  params.max_depth = 64;
  const auto surrogate = fit_perf(history, space, params, 7);
  const auto [mean, var] =
      predict_forest(surrogate.model, space.encode(configs[0]));
  REQUIRE(mean == history.at(0).error);
  REQUIRE(var == 0.0);
}

TEST_CASE("expected improvement closed forms") {
  REQUIRE(expected_improvement(0.5, 0.0, 0.5) == 0.0);
  REQUIRE(expected_improvement(0.4, 0.0, 0.5) == Catch::Approx(0.1).margin(1e-15));
  REQUIRE(expected_improvement(0.5, 1.0, 0.5) ==
          Catch::Approx(0.3989422804014327).margin(1e-12));
}

TEST_CASE("expected improvement is non-negative and monotone in the mean") {
  double previous = std::numeric_limits<double>::infinity();
  for (double mu = -1.0; mu <= 1.0; mu += 0.05) {
    const double ei = expected_improvement(mu, 0.25, 0.2);
    REQUIRE(ei >= 0.0);
    REQUIRE(ei <= previous + 1e-12);
    previous = ei;
  }
}

TEST_CASE("pair training set layout") {
  const SyntheticProblem problem(3);
  RunHistory history = synthetic_history(problem, 3, 8);
  const auto set = build_pair_training_set(history, problem.space());
  REQUIRE(set.x.n_rows == 9);
  REQUIRE(set.x.n_cols == 2 * problem.space().encoding_dim());
  REQUIRE(set.y.size() == 9);

  std::size_t zero_targets = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double t = set.y[i * 3 + j];
      if (i == j) {
        REQUIRE(t == 0.0);
        ++zero_targets;
      }
      REQUIRE(t == set.y[j * 3 + i]);  // bit-identical symmetric targets
    }
  }
  REQUIRE(zero_targets == 3);
}

TEST_CASE("orthogonal predictions give unit pair targets") {
  const ConfigSpace space = builtin_space();
  RunHistory history;
  const auto configs = sample_uniform(space, 2, 2);
  Observation a;
  a.config = configs[0];
  a.error = 0.2;
  a.predictions = one_hot_rows(5, 0);
  history.append(a);
  Observation b;
  b.config = configs[1];
  b.error = 0.4;
  b.predictions = one_hot_rows(5, 1);
  history.append(b);

  const auto set = build_pair_training_set(history, space);
  REQUIRE(set.y[0 * 2 + 1] == 1.0);
  REQUIRE(set.y[1 * 2 + 0] == 1.0);
}

TEST_CASE("fit_div reproduces constant-zero targets") {
  const ConfigSpace space = builtin_space();
  RunHistory history;
  for (const auto& config : sample_uniform(space, 5, 14)) {
    Observation obs;
    obs.config = config;
    obs.error = 0.5;
    obs.predictions = one_hot_rows(4, 0);  // identical predictions everywhere
    history.append(obs);
  }
  BagParams params;
  params.n_members = 3;
  params.member.n_rounds = 10;
  const auto surrogate = fit_div(history, space, params, 3);

  const auto set = build_pair_training_set(history, space);
  double total_residual = 0.0;
  for (std::size_t i = 0; i < set.x.n_rows; ++i) {
    std::vector<double> row(set.x.row(i), set.x.row(i) + set.x.n_cols);
    total_residual += std::abs(predict_boosted_bag(surrogate.bag, row).first);
  }
  REQUIRE(total_residual / static_cast<double>(set.x.n_rows) < 1e-6);

  RunHistory one;
  one.append(history.at(0));
  REQUIRE_THROWS_AS(fit_div(one, space, params, 0), ValidationError);
}

TEST_CASE("fitted diversity surrogate is empirically swap-symmetric") {
  const SyntheticProblem problem(11);
  RunHistory history = synthetic_history(problem, 30, 44);
  BagParams params;
  params.n_members = 4;
  params.member.n_rounds = 30;
  params.member.max_depth = 4;
  const auto surrogate = fit_div(history, problem.space(), params, 6);

  const auto& space = problem.space();
  double asymmetry = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    for (std::size_t j = i + 1; j < history.size(); ++j) {
      const auto ei = space.encode(history.at(i).config);
      const auto ej = space.encode(history.at(j).config);
      asymmetry += std::abs(predict_pair(surrogate, ei, ej) -
                            predict_pair(surrogate, ej, ei));
      ++count;
    }
  }
  REQUIRE(asymmetry / static_cast<double>(count) <= 0.05);
}

TEST_CASE("diversity acquisition degenerate cases") {
  // A bag with no trees acts as a constant predictor whose mean/variance are
  // set by the member base values.
  BoostedTreeEnsembleBag constant;
  constant.n_features = 4;
  constant.members.resize(2);
  constant.members[0].base_value = 0.2;
  constant.members[1].base_value = 0.2;
  DivSurrogate surrogate{constant};

  const std::vector<double> enc{0.1, 0.9};
  const std::vector<std::vector<double>> pool{{0.3, 0.4}};
  for (const std::size_t n : {1, 7, 100}) {
    REQUIRE(diversity_acquisition(surrogate, pool, enc, n, 5) == 0.2);
  }
  REQUIRE_THROWS_AS(diversity_acquisition(surrogate, {}, enc, 10, 0),
                    ValidationError);
}

TEST_CASE("diversity acquisition takes the exact min over constant members") {
  // One-split trees route pool members to variance-zero means 0.1 and 0.3;
  // the per-draw minimum is 0.1 regardless of the sample count.
  RegressionTree split;
  split.nodes.resize(3);
  split.nodes[0].feature = 0;
  split.nodes[0].threshold = 0.5;
  split.nodes[0].left = 1;
  split.nodes[0].right = 2;
  split.nodes[1].value = 0.1;
  split.nodes[2].value = 0.3;

  BoostedTreeEnsembleBag bag;
  bag.n_features = 2;  // pair of 1-dimensional encodings
  bag.members.resize(2);
  for (auto& member : bag.members) {
    member.base_value = 0.0;
    member.learning_rate = 1.0;
    member.trees.push_back(split);
  }
  DivSurrogate surrogate{bag};
  const double acq =
      diversity_acquisition(surrogate, {{0.0}, {1.0}}, {0.77}, 1000, 42);
  REQUIRE(acq == 0.1);
}

TEST_CASE("diversity acquisition of an in-pool candidate collapses to zero") {
  const SyntheticProblem problem(17);
  RunHistory history = synthetic_history(problem, 4, 77);
  BagParams params;
  params.n_members = 3;
  params.member.n_rounds = 120;
  params.member.max_depth = 6;
  params.member.learning_rate = 0.3;
  params.member.row_subsample = 1.0;
  params.member.feature_subsample = 1.0;
  params.member.min_samples_leaf = 1;
  const auto surrogate = fit_div(history, problem.space(), params, 5);

  const auto& space = problem.space();
  std::vector<std::vector<double>> pool_encodings;
  for (std::size_t i = 0; i < history.size(); ++i) {
    pool_encodings.push_back(space.encode(history.at(i).config));
  }
  const double acq = diversity_acquisition(
      surrogate, pool_encodings, space.encode(history.at(0).config), 10, 3);
  REQUIRE(acq <= 0.05);
}

TEST_CASE("sampled acquisition converges to the analytic two-member value") {
  // Both pool entries see the same constant surrogate with mean 1, sd 1, so
  // the acquisition is E[min(X1, X2)] for iid normals = mean - sd/sqrt(pi).
  BoostedTreeEnsembleBag bag;
  bag.n_features = 2;
  bag.members.resize(2);
  bag.members[0].base_value = 0.0;
  bag.members[1].base_value = 2.0;  // mean 1, variance 1
  DivSurrogate surrogate{bag};
  const double expected = 1.0 - 1.0 / std::sqrt(3.14159265358979323846);
  const double estimate = diversity_acquisition(
      surrogate, {{0.0}, {1.0}}, {0.5}, 200000, 123);
  REQUIRE(estimate == Catch::Approx(expected).margin(0.01));
}
