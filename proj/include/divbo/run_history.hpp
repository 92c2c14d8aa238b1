#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divbo/config_space.hpp"
#include "divbo/ensemble.hpp"
#include "divbo/error.hpp"

namespace divbo {

enum class EvalStatus { Ok, Failed };

inline std::string to_string(EvalStatus s) {
  return s == EvalStatus::Ok ? "ok" : "failed";
}

struct Observation {
  Configuration config;
  double error = 1.0;  // validation error; 1.0 penalty for failed evaluations
  PredictionMatrix predictions;
  double wall_time_s = 0.0;
  EvalStatus status = EvalStatus::Ok;
};

// Append-only record of evaluated configurations.
struct RunHistory {
  std::vector<Observation> observations;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }

  void append(Observation obs) { observations.push_back(std::move(obs)); }

  const Observation& at(std::size_t i) const { return observations.at(i); }

  std::vector<PredictionMatrix> prediction_matrices() const {
    std::vector<PredictionMatrix> out;
    out.reserve(observations.size());
    for (const auto& obs : observations) out.push_back(obs.predictions);
    return out;
  }

  // Index of the lowest-error observation; ties go to the earliest.
  std::size_t best_index() const {
    if (observations.empty()) throw ValidationError("history is empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < observations.size(); ++i) {
      if (observations[i].error < observations[best].error) best = i;
    }
    return best;
  }
};

}  // namespace divbo
