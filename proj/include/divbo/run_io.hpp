#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "divbo/ensemble.hpp"
#include "divbo/error.hpp"
#include "divbo/json_io.hpp"
#include "divbo/optimizer.hpp"

namespace divbo {

// Prediction matrices persist as little-endian 32-bit floats, row-major, with
// a JSON sidecar carrying the shape.
inline void save_prediction_matrix(const PredictionMatrix& m,
                                   const std::string& path_base) {
  std::ofstream bin(path_base + ".f32", std::ios::binary);
  if (!bin) throw ValidationError("cannot write '" + path_base + ".f32'");
  bin.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  json sidecar;
  sidecar["n_samples"] = m.n_samples;
  sidecar["n_classes"] = m.n_classes;
  std::ofstream meta(path_base + ".json");
  meta << sidecar.dump() << "\n";
}

inline PredictionMatrix load_prediction_matrix(const std::string& path_base) {
  std::ifstream meta(path_base + ".json");
  if (!meta) throw ValidationError("cannot read '" + path_base + ".json'");
  json sidecar;
  meta >> sidecar;
  PredictionMatrix m(sidecar.at("n_samples").get<std::size_t>(),
                     sidecar.at("n_classes").get<std::size_t>());
  std::ifstream bin(path_base + ".f32", std::ios::binary);
  if (!bin) throw ValidationError("cannot read '" + path_base + ".f32'");
  bin.read(reinterpret_cast<char*>(m.values.data()),
           static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  if (bin.gcount() !=
      static_cast<std::streamsize>(m.values.size() * sizeof(float))) {
    throw ValidationError("prediction file '" + path_base + ".f32' truncated");
  }
  return m;
}

inline json iteration_record_to_json(const IterationRecord& r) {
  json j;
  j["iteration"] = r.iteration;
  j["config"] = config_to_json(r.config);
  j["error"] = r.error;
  j["status"] = to_string(r.status);
  j["w"] = r.w;
  if (std::isnan(r.min_diversity)) {
    j["min_diversity"] = nullptr;
  } else {
    j["min_diversity"] = r.min_diversity;
  }
  j["pool"] = r.pool_members;
  if (std::isnan(r.ensemble_val_error)) {
    j["ensemble_val_error"] = nullptr;
  } else {
    j["ensemble_val_error"] = r.ensemble_val_error;
  }
  return j;
}

struct RunRecordOnDisk {
  std::size_t iteration = 0;
  json config;
  double error = 1.0;
  std::string status;
  double w = 0.0;
  double min_diversity = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> pool_members;
  double ensemble_val_error = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<RunRecordOnDisk> read_history_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::vector<RunRecordOnDisk> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    RunRecordOnDisk r;
    r.iteration = j.at("iteration").get<std::size_t>();
    r.config = j.at("config");
    r.error = j.at("error").get<double>();
    r.status = j.at("status").get<std::string>();
    r.w = j.at("w").get<double>();
    if (!j.at("min_diversity").is_null()) {
      r.min_diversity = j.at("min_diversity").get<double>();
    }
    r.pool_members = j.at("pool").get<std::vector<std::size_t>>();
    if (!j.at("ensemble_val_error").is_null()) {
      r.ensemble_val_error = j.at("ensemble_val_error").get<double>();
    }
    records.push_back(std::move(r));
  }
  return records;
}

// Writes the run directory: config.json, history.jsonl, preds/<idx> and
// result.json. history.jsonl content is a pure function of the run result,
// so identical runs produce identical bytes.
inline void write_run_dir(const std::string& dir, const RunResult& result,
                          const DivBOConfig& cfg,
                          const std::string& problem_descriptor) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "preds");

  {
    json j;
    j["method"] = to_string(result.method);
    j["problem"] = problem_descriptor;
    j["config"] = divbo_config_to_json(cfg);
    std::ofstream out(fs::path(dir) / "config.json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "history.jsonl");
    for (const auto& record : result.records) {
      out << iteration_record_to_json(record).dump() << "\n";
    }
  }
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    save_prediction_matrix(
        result.history.at(i).predictions,
        (fs::path(dir) / "preds" / std::to_string(i)).string());
  }
  {
    json j;
    j["method"] = to_string(result.method);
    j["final_pool"] = result.final_pool.members;
    j["best_single_index"] = result.best_single_index;
    j["final_val_error"] = result.final_val_error;
    if (std::isnan(result.final_test_error)) {
      j["final_test_error"] = nullptr;
    } else {
      j["final_test_error"] = result.final_test_error;
    }
    j["best_single_val_error"] =
        result.history.at(result.best_single_index).error;
    j["status"] = result.partial ? "partial" : "complete";
    j["wall_time_s"] = result.wall_time_s;
    std::ofstream out(fs::path(dir) / "result.json");
    out << j.dump(2) << "\n";
  }
}

}  // namespace divbo
