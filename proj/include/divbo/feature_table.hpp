#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "divbo/error.hpp"

namespace divbo {

// Dense row-major feature matrix shared by the tree learners.
struct FeatureTable {
  std::vector<double> values;  // n_rows * n_cols, row-major
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;

  FeatureTable() = default;
  FeatureTable(std::size_t rows, std::size_t cols)
      : values(rows * cols, 0.0), n_rows(rows), n_cols(cols) {}

  static FeatureTable from_rows(const std::vector<std::vector<double>>& rows) {
    FeatureTable t;
    t.n_rows = rows.size();
    t.n_cols = rows.empty() ? 0 : rows.front().size();
    t.values.reserve(t.n_rows * t.n_cols);
    for (const auto& row : rows) {
      if (row.size() != t.n_cols) {
        throw ValidationError("feature rows have inconsistent widths");
      }
      t.values.insert(t.values.end(), row.begin(), row.end());
    }
    return t;
  }

  double at(std::size_t row, std::size_t col) const {
    return values[row * n_cols + col];
  }
  double& at(std::size_t row, std::size_t col) {
    return values[row * n_cols + col];
  }
  const double* row(std::size_t r) const { return values.data() + r * n_cols; }

  void check_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw ValidationError("feature matrix contains non-finite values");
      }
    }
  }
};

}  // namespace divbo
