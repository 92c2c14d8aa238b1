#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divbo/config_space.hpp"
#include "divbo/ensemble.hpp"
#include "divbo/run_history.hpp"

namespace divbo {

struct EvalOutcome {
  PredictionMatrix val_predictions;
  double val_error = 1.0;
  EvalStatus status = EvalStatus::Ok;
  // Test-set predictions when the problem carries a test split.
  PredictionMatrix test_predictions;
  bool has_test = false;
};

// A black-box CASH problem: a search space plus an evaluator mapping a
// configuration to validation predictions and error, deterministically for a
// given seed.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual const ConfigSpace& space() const = 0;
  virtual std::size_t n_classes() const = 0;
  virtual const std::vector<std::size_t>& val_labels() const = 0;
  virtual const std::vector<std::size_t>* test_labels() const { return nullptr; }
  virtual EvalOutcome evaluate(const Configuration& config,
                               std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

}  // namespace divbo
