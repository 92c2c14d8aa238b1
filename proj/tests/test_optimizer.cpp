#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "divbo/optimizer.hpp"
#include "divbo/synthetic.hpp"

using namespace divbo;

namespace {

DivBOConfig small_cfg(std::size_t budget, std::uint64_t seed) {
  DivBOConfig cfg;
  cfg.budget = budget;
  cfg.seed = seed;
  cfg.n_global_candidates = 300;
  cfg.n_local_candidates = 20;
  cfg.ensemble_size = 8;
  cfg.div_params.n_members = 3;
  cfg.div_params.member.n_rounds = 10;
  cfg.div_params.member.max_depth = 3;
  return cfg;
}

// A problem that deterministically fails on one algorithm.
class FailingProblem : public Problem {
 public:
  FailingProblem() : inner_(3) {}
  const ConfigSpace& space() const override { return inner_.space(); }
  std::size_t n_classes() const override { return 2; }
  const std::vector<std::size_t>& val_labels() const override {
    return inner_.val_labels();
  }
  std::string name() const override { return "failing"; }
  EvalOutcome evaluate(const Configuration& config,
                       std::uint64_t seed) const override {
    if (space().algorithm_of(config) == "naive_bayes") {
      throw std::runtime_error("training crashed");
    }
    return inner_.evaluate(config, seed);
  }

 private:
  SyntheticProblem inner_;
};

}  // namespace

TEST_CASE("weight schedule closed forms") {
  REQUIRE(weight_schedule(0.0, 0.05, 0.2) == 0.0);
  // Independent sigmoid route: 0.5 * (1 + tanh(x / 2)).
  const double sigmoid2 = 0.5 * (1.0 + std::tanh(1.0));
  const double expected = 0.05 * (sigmoid2 - 0.5);  // 0.019039853898894...
  REQUIRE(weight_schedule(10.0, 0.05, 0.2) ==
          Catch::Approx(expected).margin(1e-12));
  REQUIRE(weight_schedule(10.0, 0.05, 0.2) ==
          Catch::Approx(0.0190399).margin(1e-6));
  const double saturated = weight_schedule(250.0, 0.05, 0.2);
  REQUIRE(0.025 - saturated >= 0.0);
  REQUIRE(0.025 - saturated < 1e-10);
}

TEST_CASE("weight schedule is monotone and bounded by beta/2") {
  for (const double beta : {0.0, 0.025, 0.05, 0.2}) {
    for (const double tau : {0.05, 0.2, 0.4, 1.0}) {
      double prev = -1.0;
      for (double t = 0.0; t <= 400.0; t += 5.0) {
        const double w = weight_schedule(t, beta, tau);
        REQUIRE(w >= prev);
        REQUIRE(w < beta / 2.0 + 1e-15);
        prev = w;
      }
    }
  }
}

TEST_CASE("rank_values competition ranking") {
  REQUIRE(rank_values({0.3, 0.1, 0.5}) == std::vector<std::int64_t>{2, 3, 1});
  REQUIRE(rank_values({0.2, 0.2, 0.1}) == std::vector<std::int64_t>{1, 1, 3});
  REQUIRE_THROWS_AS(rank_values({std::nan("")}), ValidationError);
  REQUIRE_THROWS_AS(rank_values({}), ValidationError);
}

TEST_CASE("ranks are invariant under strictly increasing transforms") {
  Rng rng(3);
  std::vector<double> values(50);
  for (auto& v : values) v = rng.uniform();
  const auto base = rank_values(values);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = 0.5 + rng.uniform();
    const double b = rng.uniform() * 4.0 - 2.0;
    std::vector<double> mapped(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      mapped[i] = std::exp(a * values[i]) + b;
    }
    REQUIRE(rank_values(mapped) == base);
  }
}

TEST_CASE("combined acquisition arithmetic") {
  const auto alpha = combined_acquisition({1, 2}, {2, 1}, 0.05);
  REQUIRE(alpha[0] == Catch::Approx(1.1).margin(1e-12));
  REQUIRE(alpha[1] == Catch::Approx(2.05).margin(1e-12));
  REQUIRE(alpha[0] < alpha[1]);

  // w = 0 reduces to the performance ranks.
  const auto reduced = combined_acquisition({3, 1, 2}, {1, 2, 3}, 0.0);
  REQUIRE(reduced == std::vector<double>{3.0, 1.0, 2.0});

  // Large w lets the diversity ranks dominate.
  const auto dominated = combined_acquisition({1, 2}, {2, 1}, 10.0);
  REQUIRE(dominated[1] < dominated[0]);

  REQUIRE_THROWS_AS(combined_acquisition({1}, {1, 2}, 0.1), ValidationError);
}

TEST_CASE("config validation") {
  DivBOConfig cfg;
  cfg.beta = -0.1;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = DivBOConfig{};
  cfg.tau = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = DivBOConfig{};
  cfg.ensemble_size = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("all-random prefix is method independent") {
  const SyntheticProblem problem(2);
  auto cfg = small_cfg(5, 77);
  const auto rs = run(Method::RS, problem, cfg);
  const auto bo = run(Method::BO_ES, problem, cfg);
  const auto divbo = run(Method::DivBO, problem, cfg);
  REQUIRE(rs.history.size() == 5);
  for (std::size_t t = 0; t < 5; ++t) {
    REQUIRE(rs.history.at(t).config == bo.history.at(t).config);
    REQUIRE(rs.history.at(t).config == divbo.history.at(t).config);
  }
}

TEST_CASE("DivBO with beta 0 reduces to BO-ES") {
  const SyntheticProblem problem(4);
  auto cfg = small_cfg(14, 123);
  cfg.beta = 0.0;
  const auto bo = run(Method::BO_ES, problem, cfg);
  const auto divbo = run(Method::DivBO, problem, cfg);
  REQUIRE(bo.history.size() == divbo.history.size());
  for (std::size_t t = 0; t < bo.history.size(); ++t) {
    REQUIRE(bo.history.at(t).config == divbo.history.at(t).config);
    REQUIRE(bo.history.at(t).error == divbo.history.at(t).error);
    REQUIRE(bo.records[t].w == 0.0);
    REQUIRE(divbo.records[t].w == 0.0);
  }
  REQUIRE(bo.final_pool.members == divbo.final_pool.members);
}

TEST_CASE("runs are exactly reproducible") {
  const SyntheticProblem problem(6);
  auto cfg = small_cfg(12, 9);
  const auto a = run(Method::DivBO, problem, cfg);
  const auto b = run(Method::DivBO, problem, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t t = 0; t < a.history.size(); ++t) {
    REQUIRE(a.history.at(t).config == b.history.at(t).config);
    REQUIRE(a.history.at(t).error == b.history.at(t).error);
    const bool same_min_div =
        a.records[t].min_diversity == b.records[t].min_diversity ||
        (std::isnan(a.records[t].min_diversity) &&
         std::isnan(b.records[t].min_diversity));
    REQUIRE(same_min_div);
    REQUIRE(a.records[t].pool_members == b.records[t].pool_members);
  }
}

TEST_CASE("suggestion diagnostics carry the pool and weight") {
  const SyntheticProblem problem(8);
  auto cfg = small_cfg(10, 31);
  const auto result = run(Method::DivBO, problem, cfg);
  bool saw_positive_w = false;
  for (std::size_t t = cfg.init_random; t < result.records.size(); ++t) {
    REQUIRE(!result.records[t].pool_members.empty());
    if (result.records[t].w > 0.0) saw_positive_w = true;
  }
  REQUIRE(saw_positive_w);
  // Non-diversity methods always record w = 0.
  const auto bo = run(Method::BO_ES, problem, cfg);
  for (const auto& r : bo.records) REQUIRE(r.w == 0.0);
}

TEST_CASE("failed evaluations are recorded and the run continues") {
  const FailingProblem problem;
  auto cfg = small_cfg(10, 3);
  const auto result = run(Method::RS_ES, problem, cfg);
  REQUIRE(result.history.size() == 10);
  bool saw_failure = false;
  for (std::size_t t = 0; t < result.history.size(); ++t) {
    const auto& obs = result.history.at(t);
    if (obs.status == EvalStatus::Failed) {
      saw_failure = true;
      REQUIRE(obs.error == 1.0);
      REQUIRE(obs.predictions.at(0, 0) == 0.5f);
    }
  }
  REQUIRE(saw_failure);
  REQUIRE(!result.final_pool.empty());
}

TEST_CASE("duplicate-candidate suppression falls back to a fresh sample") {
  // A space with only two distinct configurations: after both are evaluated
  // every candidate is a duplicate, so the fallback sample must kick in.
  auto root = HyperparameterDef::categorical("algo", {"a", "b"});
  ConfigSpace space(std::move(root), {});

  class TinyProblem : public Problem {
   public:
    explicit TinyProblem(ConfigSpace space) : space_(std::move(space)) {
      labels_ = {0, 1, 0, 1};
    }
    const ConfigSpace& space() const override { return space_; }
    std::size_t n_classes() const override { return 2; }
    const std::vector<std::size_t>& val_labels() const override {
      return labels_;
    }
    std::string name() const override { return "tiny"; }
    EvalOutcome evaluate(const Configuration& config,
                         std::uint64_t) const override {
      EvalOutcome out;
      out.val_predictions = PredictionMatrix(4, 2);
      const bool is_a = config.str_at("algo") == "a";
      for (std::size_t s = 0; s < 4; ++s) {
        out.val_predictions.at(s, is_a ? 0 : 1) = 1.0f;
      }
      out.val_error = classification_error(out.val_predictions, labels_);
      return out;
    }

   private:
    ConfigSpace space_;
    std::vector<std::size_t> labels_;
  };

  TinyProblem problem(space);
  DivBOConfig cfg = small_cfg(8, 5);
  cfg.init_random = 2;
  const auto result = run(Method::BO, problem, cfg);
  REQUIRE(result.history.size() == 8);
}

TEST_CASE("effective pool updates from hand-built traces") {
  auto record = [](std::vector<std::size_t> pool, double err) {
    IterationRecord r;
    r.pool_members = std::move(pool);
    r.ensemble_val_error = err;
    return r;
  };
  // Pool never changes.
  {
    std::vector<IterationRecord> recs{record({0}, 0.5), record({0}, 0.5),
                                      record({0}, 0.5)};
    for (std::size_t i = 1; i < recs.size(); ++i) {
      recs[i].pool_changed = !EnsemblePool{recs[i].pool_members}.same_multiset(
          EnsemblePool{recs[i - 1].pool_members});
    }
    REQUIRE(effective_pool_updates(recs, 3) == 0);
  }
  // Pool changes but the error stays flat.
  {
    std::vector<IterationRecord> recs{record({0}, 0.5), record({1}, 0.5),
                                      record({0, 1}, 0.5)};
    for (std::size_t i = 1; i < recs.size(); ++i) {
      recs[i].pool_changed = !EnsemblePool{recs[i].pool_members}.same_multiset(
          EnsemblePool{recs[i - 1].pool_members});
    }
    REQUIRE(effective_pool_updates(recs, 3) == 0);
  }
  // Exactly one qualifying update in a 4-step trace.
  {
    std::vector<IterationRecord> recs{record({0}, 0.5), record({0, 1}, 0.4),
                                      record({0, 1}, 0.4),
                                      record({1, 1}, 0.45)};
    for (std::size_t i = 1; i < recs.size(); ++i) {
      recs[i].pool_changed = !EnsemblePool{recs[i].pool_members}.same_multiset(
          EnsemblePool{recs[i - 1].pool_members});
    }
    REQUIRE(effective_pool_updates(recs, 4) == 1);
    // Window clamps to the history length.
    REQUIRE(effective_pool_updates(recs, 50) == 1);
  }
}

TEST_CASE("method name round trip") {
  for (const Method m : {Method::RS, Method::BO, Method::DivBOMinus,
                         Method::RS_ES, Method::BO_ES, Method::DivBO}) {
    REQUIRE(method_from_string(to_string(m)) == m);
  }
  REQUIRE_THROWS_AS(method_from_string("nope"), ValidationError);
}
