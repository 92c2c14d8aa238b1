#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "divbo/dataset.hpp"

using namespace divbo;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "divbo_csv";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / name).string();
  std::ofstream out(path);
  out << body;
  return path;
}

std::string balanced_csv(std::size_t rows_per_class) {
  std::string body = "f1,f2,label\n";
  Rng rng(3);
  for (std::size_t i = 0; i < 2 * rows_per_class; ++i) {
    const int label = i < rows_per_class ? 0 : 1;
    body += std::to_string(rng.uniform()) + "," + std::to_string(rng.uniform()) +
            "," + (label == 0 ? "yes" : "no") + "\n";
  }
  return body;
}

}  // namespace

TEST_CASE("stratified 60/20/20 split") {
  const auto path = write_temp_csv("balanced.csv", balanced_csv(50));
  const Dataset ds = ingest_csv(path, "label", 7);
  REQUIRE(ds.x.n_rows == 100);
  REQUIRE(ds.train_idx.size() == 60);
  REQUIRE(ds.val_idx.size() == 20);
  REQUIRE(ds.test_idx.size() == 20);

  auto class_balance = [&](const std::vector<std::size_t>& idx) {
    std::size_t ones = 0;
    for (const auto i : idx) ones += ds.y[i];
    return ones;
  };
  REQUIRE(class_balance(ds.train_idx) == 30);
  REQUIRE(class_balance(ds.val_idx) == 10);
  REQUIRE(class_balance(ds.test_idx) == 10);

  // Disjoint and covering.
  std::vector<std::size_t> all;
  all.insert(all.end(), ds.train_idx.begin(), ds.train_idx.end());
  all.insert(all.end(), ds.val_idx.begin(), ds.val_idx.end());
  all.insert(all.end(), ds.test_idx.begin(), ds.test_idx.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);
}

TEST_CASE("splits are reproducible") {
  const auto path = write_temp_csv("repro.csv", balanced_csv(30));
  const Dataset a = ingest_csv(path, "label", 11);
  const Dataset b = ingest_csv(path, "label", 11);
  REQUIRE(a.train_idx == b.train_idx);
  REQUIRE(a.val_idx == b.val_idx);
  REQUIRE(a.test_idx == b.test_idx);
  const Dataset c = ingest_csv(path, "label", 12);
  REQUIRE(a.train_idx != c.train_idx);
}

TEST_CASE("missing target column error code") {
  const auto path = write_temp_csv("missing.csv", balanced_csv(10));
  try {
    ingest_csv(path, "target", 1);
    FAIL("expected DatasetException");
  } catch (const DatasetException& e) {
    REQUIRE(e.code() == DatasetError::MissingColumn);
  }
}

TEST_CASE("missing file error code") {
  try {
    ingest_csv("/nonexistent/never.csv", "label", 1);
    FAIL("expected DatasetException");
  } catch (const DatasetException& e) {
    REQUIRE(e.code() == DatasetError::MissingFile);
  }
}

TEST_CASE("single-class data error code") {
  const auto path = write_temp_csv(
      "single.csv", "f,label\n0.1,same\n0.2,same\n0.3,same\n");
  try {
    ingest_csv(path, "label", 1);
    FAIL("expected DatasetException");
  } catch (const DatasetException& e) {
    REQUIRE(e.code() == DatasetError::SingleClass);
  }
}

TEST_CASE("string features expand one-hot") {
  const auto path = write_temp_csv("onehot.csv",
                                   "f1,color,label\n"
                                   "0.1,red,0\n"
                                   "0.2,green,1\n"
                                   "0.3,blue,0\n"
                                   "0.4,red,1\n"
                                   "0.5,green,0\n");
  const Dataset ds = ingest_csv(path, "label", 3);
  REQUIRE(ds.x.n_cols == 4);  // f1 + three colors
  REQUIRE(ds.feature_names ==
          std::vector<std::string>{"f1", "color=blue", "color=green",
                                   "color=red"});
  // Row 0 is red.
  REQUIRE(ds.x.at(0, 3) == 1.0);
  REQUIRE(ds.x.at(0, 1) == 0.0);
}

TEST_CASE("rows with unparseable numerics are dropped and counted") {
  const auto path = write_temp_csv("dropme.csv",
                                   "f1,label\n"
                                   "0.1,0\n"
                                   "oops,1\n"
                                   "0.3,1\n"
                                   "?,0\n"
                                   "0.5,0\n"
                                   "0.6,1\n");
  const Dataset ds = ingest_csv(path, "label", 1);
  REQUIRE(ds.n_dropped_rows == 2);
  REQUIRE(ds.x.n_rows == 4);
}

TEST_CASE("dataset problem exposes labels and evaluates learners") {
  const auto path = write_temp_csv("problem.csv", balanced_csv(60));
  Dataset ds = ingest_csv(path, "label", 9);
  DatasetProblem problem(std::move(ds), "toy");
  REQUIRE(problem.n_classes() == 2);
  REQUIRE(problem.val_labels().size() == 24);
  REQUIRE(problem.test_labels() != nullptr);

  const auto config = sample_uniform(problem.space(), 1, 5).front();
  const auto outcome = problem.evaluate(config, 3);
  outcome.val_predictions.check_row_stochastic();
  REQUIRE(outcome.has_test);
  REQUIRE(outcome.test_predictions.n_samples == problem.test_labels()->size());
  REQUIRE(outcome.val_error >= 0.0);
  REQUIRE(outcome.val_error <= 1.0);
}
