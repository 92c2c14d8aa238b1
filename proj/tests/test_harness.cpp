#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "divbo/experiments.hpp"
#include "divbo/openml.hpp"
#include "divbo/synthetic.hpp"

using namespace divbo;
namespace fs = std::filesystem;

namespace {

std::string quake_like_csv(std::size_t rows) {
  std::string body = "focal_depth,latitude,longitude,richter\n";
  Rng rng(5);
  for (std::size_t i = 0; i < rows; ++i) {
    body += std::to_string(rng.uniform(0, 700)) + "," +
            std::to_string(rng.uniform(-90, 90)) + "," +
            std::to_string(rng.uniform(-180, 180)) + "," +
            (rng.uniform() < 0.4 ? "high" : "low") + "\n";
  }
  return body;
}

struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit StubServer(const std::string& csv) {
    server.Get("/api/v1/json/data/772", [](const httplib::Request&,
                                           httplib::Response& res) {
      res.set_content(
          R"({"data_set_description":{"id":"772","name":"quake","file_id":"52626","default_target_attribute":"richter"}})",
          "application/json");
    });
    server.Get("/api/v1/json/data/999999",
               [](const httplib::Request&, httplib::Response& res) {
                 res.status = 404;
                 res.set_content(R"({"error":{"code":"111"}})",
                                 "application/json");
               });
    server.Get("/api/v1/json/data/55555",
               [](const httplib::Request&, httplib::Response& res) {
                 res.set_content("this is not json", "application/json");
               });
    server.Get("/api/v1/json/data/66666", [](const httplib::Request&,
                                             httplib::Response& res) {
      res.set_content(
          R"({"data_set_description":{"id":"66666","name":"empty","file_id":"1"}})",
          "application/json");
    });
    server.Get("/data/v1/get_csv/52626",
               [csv](const httplib::Request&, httplib::Response& res) {
                 res.set_content(csv, "text/csv");
               });
    server.Get("/data/v1/get_csv/1",
               [](const httplib::Request&, httplib::Response& res) {
                 res.set_content("", "text/csv");
               });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubServer() {
    server.stop();
    thread.join();
  }

  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port);
  }
};

}  // namespace

TEST_CASE("fetch_openml downloads, caches and ingests") {
  const std::string csv = quake_like_csv(120);
  StubServer stub(csv);
  const auto dir = fs::temp_directory_path() / "divbo_openml";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string out = (dir / "quake.csv").string();

  const auto result = fetch_openml(772, out, stub.base_url());
  REQUIRE(result.dataset_name == "quake");
  REQUIRE(result.default_target == "richter");
  REQUIRE(!result.from_cache);
  std::ifstream check(out);
  std::stringstream buf;
  buf << check.rdbuf();
  REQUIRE(buf.str() == csv);

  const auto cached = fetch_openml(772, out, stub.base_url());
  REQUIRE(cached.from_cache);

  const Dataset ds = ingest_csv(out, "richter", 3);
  REQUIRE(ds.x.n_rows == 120);
  REQUIRE(ds.x.n_cols == 3);
  REQUIRE(ds.n_classes() == 2);
}

TEST_CASE("fetch_openml error codes") {
  StubServer stub("x,y\n1,2\n");
  const auto dir = fs::temp_directory_path() / "divbo_openml_err";
  fs::remove_all(dir);
  fs::create_directories(dir);

  try {
    fetch_openml(999999, (dir / "none.csv").string(), stub.base_url());
    FAIL("expected unknown id");
  } catch (const OpenMLException& e) {
    REQUIRE(e.code() == OpenMLError::UnknownId);
  }
  REQUIRE(!fs::exists(dir / "none.csv"));

  try {
    fetch_openml(55555, (dir / "bad.csv").string(), stub.base_url());
    FAIL("expected malformed");
  } catch (const OpenMLException& e) {
    REQUIRE(e.code() == OpenMLError::Malformed);
  }
  REQUIRE(!fs::exists(dir / "bad.csv"));

  try {
    fetch_openml(66666, (dir / "empty.csv").string(), stub.base_url());
    FAIL("expected malformed payload");
  } catch (const OpenMLException& e) {
    REQUIRE(e.code() == OpenMLError::Malformed);
  }
  REQUIRE(!fs::exists(dir / "empty.csv"));

  try {
    fetch_openml(772, (dir / "down.csv").string(), "http://127.0.0.1:1");
    FAIL("expected network error");
  } catch (const OpenMLException& e) {
    REQUIRE(e.code() == OpenMLError::Network);
  }
}

TEST_CASE("surrogate eval produces a point per checkpoint") {
  const SyntheticProblem problem(3);
  SurrogateEvalParams params;
  params.n_configs = 70;
  params.n_test_configs = 20;
  params.n_test_pairs = 20;
  params.checkpoints = {20, 35, 50};
  params.div_params.n_members = 3;
  params.div_params.member.n_rounds = 15;
  params.div_params.member.max_depth = 3;
  const auto curve = surrogate_eval_experiment(problem, params, 7);
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    REQUIRE(curve[i].n_fitted == params.checkpoints[i]);
    REQUIRE(curve[i].div_defined);
  }
}

TEST_CASE("experiment harness writes runs and reports") {
  const auto out_root = fs::temp_directory_path() / "divbo_exp";
  fs::remove_all(out_root);

  DivBOConfig cfg;
  cfg.budget = 8;
  cfg.n_global_candidates = 120;
  cfg.n_local_candidates = 10;
  cfg.ensemble_size = 5;
  cfg.div_params.n_members = 3;
  cfg.div_params.member.n_rounds = 8;
  cfg.div_params.member.max_depth = 3;

  std::vector<std::pair<std::string, ProblemFactory>> problems;
  problems.push_back(
      {"synthetic", [] { return std::make_unique<SyntheticProblem>(4); }});

  const auto report =
      run_experiment(problems, {Method::RS_ES, Method::BO_ES}, {1, 2}, cfg,
                     (out_root / "runs").string(), 2);
  REQUIRE(report.runs.size() == 4);
  for (const auto& run : report.runs) {
    REQUIRE(run.ok);
    REQUIRE(fs::exists(fs::path(run.dir) / "history.jsonl"));
    REQUIRE(fs::exists(fs::path(run.dir) / "result.json"));
    REQUIRE(fs::exists(fs::path(run.dir) / "config.json"));
    REQUIRE(fs::exists(fs::path(run.dir) / "preds" / "0.f32"));
  }

  emit_report(report, (out_root / "report").string(), Method::BO_ES);
  REQUIRE(fs::exists(out_root / "report" / "report.json"));
  REQUIRE(fs::exists(out_root / "report" / "ranks.csv"));
  REQUIRE(fs::exists(out_root / "report" / "traces.csv"));

  // Two methods: fractional ranks at each iteration must sum to 3.
  std::ifstream ranks(out_root / "report" / "ranks.csv");
  std::string line;
  std::getline(ranks, line);  // header
  std::map<std::string, double> sums;
  while (std::getline(ranks, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    sums[line.substr(0, first)] += std::stod(line.substr(second + 1));
  }
  REQUIRE(sums.size() == cfg.budget);
  for (const auto& [iteration, total] : sums) {
    REQUIRE(total == Catch::Approx(3.0).margin(1e-9));
  }

  // Raw rows on disk reproduce the in-memory summaries.
  for (const auto& run : report.runs) {
    const auto loaded =
        load_run_summary(run.dir, run.problem, run.method, run.seed);
    REQUIRE(loaded.final_val_error == run.final_val_error);
    REQUIRE(loaded.best_val_trace == run.best_val_trace);
    REQUIRE(loaded.effective_updates_last_third ==
            run.effective_updates_last_third);
    if (!std::isnan(run.avg_pool_member_error)) {
      REQUIRE(loaded.avg_pool_member_error ==
              Catch::Approx(run.avg_pool_member_error).margin(1e-12));
    }
  }
}

TEST_CASE("single run summary equals its raw trace") {
  const auto out_root = fs::temp_directory_path() / "divbo_exp_single";
  fs::remove_all(out_root);
  DivBOConfig cfg;
  cfg.budget = 6;
  cfg.n_global_candidates = 60;
  cfg.n_local_candidates = 5;
  cfg.ensemble_size = 3;

  std::vector<std::pair<std::string, ProblemFactory>> problems;
  problems.push_back(
      {"synthetic", [] { return std::make_unique<SyntheticProblem>(9); }});
  const auto report = run_experiment(problems, {Method::RS}, {5}, cfg,
                                     (out_root / "runs").string(), 1);
  REQUIRE(report.runs.size() == 1);
  const auto& only = report.runs[0];
  const auto records =
      read_history_jsonl((fs::path(only.dir) / "history.jsonl").string());
  REQUIRE(records.size() == 6);
  double best = 1e9;
  for (std::size_t t = 0; t < records.size(); ++t) {
    best = std::min(best, records[t].error);
    REQUIRE(only.best_val_trace[t] == best);
  }
}

TEST_CASE("history.jsonl is byte-identical across reruns") {
  const auto out_root = fs::temp_directory_path() / "divbo_repro";
  fs::remove_all(out_root);
  DivBOConfig cfg;
  cfg.budget = 7;
  cfg.seed = 3;
  cfg.n_global_candidates = 100;
  cfg.n_local_candidates = 10;
  cfg.ensemble_size = 4;
  cfg.div_params.n_members = 3;
  cfg.div_params.member.n_rounds = 8;

  const SyntheticProblem problem(12);
  const auto r1 = run(Method::DivBO, problem, cfg);
  const auto r2 = run(Method::DivBO, problem, cfg);
  write_run_dir((out_root / "a").string(), r1, cfg, problem.name());
  write_run_dir((out_root / "b").string(), r2, cfg, problem.name());

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  REQUIRE(slurp(out_root / "a" / "history.jsonl") ==
          slurp(out_root / "b" / "history.jsonl"));
}
