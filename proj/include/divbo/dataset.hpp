#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "divbo/error.hpp"
#include "divbo/feature_table.hpp"
#include "divbo/learners.hpp"
#include "divbo/problem.hpp"
#include "divbo/rng.hpp"

namespace divbo {

enum class DatasetError { MissingFile, MissingColumn, SingleClass, Malformed };

class DatasetException : public ValidationError {
 public:
  DatasetException(DatasetError code, const std::string& what)
      : ValidationError(what), code_(code) {}
  DatasetError code() const { return code_; }

 private:
  DatasetError code_;
};

// Numeric feature matrix with class labels and seeded stratified
// train/val/test splits (60/20/20 by default).
struct Dataset {
  FeatureTable x;
  std::vector<std::size_t> y;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  std::size_t n_dropped_rows = 0;
  std::string source;

  std::size_t n_classes() const { return class_names.size(); }

  FeatureTable gather(const std::vector<std::size_t>& rows) const {
    FeatureTable out(rows.size(), x.n_cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(x.row(rows[i]), x.row(rows[i]) + x.n_cols,
                out.values.begin() + i * x.n_cols);
    }
    return out;
  }

  std::vector<std::size_t> gather_labels(
      const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[rows[i]];
    return out;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(current);
      current.clear();
    } else if (ch != '\r') {
      current.push_back(ch);
    }
  }
  fields.push_back(current);
  return fields;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool parse_number(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

inline bool is_missing(const std::string& s) {
  const std::string t = trim(s);
  return t.empty() || t == "?" || t == "NA" || t == "na" || t == "null";
}

}  // namespace detail

// Seeded stratified split: per class, a shuffled 60/20/20 partition.
inline void stratified_split(Dataset& ds, std::uint64_t seed,
                             double val_fraction = 0.2,
                             double test_fraction = 0.2) {
  ds.train_idx.clear();
  ds.val_idx.clear();
  ds.test_idx.clear();
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.y.size(); ++i) by_class[ds.y[i]].push_back(i);
  for (auto& [label, rows] : by_class) {
    Rng rng(derive_seed(seed, 0x5117, label));
    rng.shuffle(rows);
    const auto n = rows.size();
    const auto n_val =
        static_cast<std::size_t>(std::llround(val_fraction * n));
    const auto n_test =
        static_cast<std::size_t>(std::llround(test_fraction * n));
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_val) {
        ds.val_idx.push_back(rows[i]);
      } else if (i < n_val + n_test) {
        ds.test_idx.push_back(rows[i]);
      } else {
        ds.train_idx.push_back(rows[i]);
      }
    }
  }
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.val_idx.begin(), ds.val_idx.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
}

// Loads a CSV with a header row. Columns whose non-missing values all parse
// as numbers become numeric features; other columns are one-hot expanded.
// Rows with missing or unparseable cells are dropped (count reported on the
// returned dataset). The target column maps to class indices in sorted-name
// order, and the result carries a seeded stratified 60/20/20 split.
inline Dataset ingest_csv(const std::string& path,
                          const std::string& target_column,
                          std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) {
    throw DatasetException(DatasetError::MissingFile,
                           "cannot open dataset file '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DatasetException(DatasetError::Malformed, "empty dataset file");
  }
  const auto header = detail::split_csv_line(line);
  std::size_t target_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (detail::trim(header[c]) == target_column) target_col = c;
  }
  if (target_col == header.size()) {
    throw DatasetException(DatasetError::MissingColumn,
                           "missing target column '" + target_column + "'");
  }

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DatasetException(DatasetError::Malformed,
                             "row width differs from header");
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) {
    throw DatasetException(DatasetError::Malformed, "dataset has no rows");
  }

  // Column typing: numeric when a majority of the non-missing values parse
  // as numbers (the stray unparseable rows are dropped below).
  const std::size_t n_cols = header.size();
  std::vector<bool> numeric(n_cols, true);
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (c == target_col) continue;
    std::size_t parseable = 0;
    std::size_t present = 0;
    for (const auto& row : rows) {
      if (detail::is_missing(row[c])) continue;
      ++present;
      double v;
      if (detail::parse_number(row[c], v)) ++parseable;
    }
    numeric[c] = present == 0 || 2 * parseable > present;
  }

  // Drop rows with any missing cell or unparseable numeric cell.
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    bool ok = true;
    for (std::size_t c = 0; c < n_cols && ok; ++c) {
      if (detail::is_missing(rows[r][c])) ok = false;
      if (ok && numeric[c] && c != target_col) {
        double v;
        if (!detail::parse_number(rows[r][c], v)) ok = false;
      }
    }
    if (ok) keep.push_back(r);
  }

  Dataset ds;
  ds.source = path;
  ds.n_dropped_rows = rows.size() - keep.size();
  if (keep.empty()) {
    throw DatasetException(DatasetError::Malformed, "all rows were dropped");
  }
  if (ds.n_dropped_rows > 0) {
    std::cerr << "ingest_csv: dropped " << ds.n_dropped_rows
              << " rows with missing or unparseable values from '" << path
              << "'\n";
  }

  // Categorical feature columns expand one-hot over sorted unique values.
  std::vector<std::vector<std::string>> categories(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (c == target_col || numeric[c]) continue;
    std::set<std::string> unique;
    for (const std::size_t r : keep) unique.insert(detail::trim(rows[r][c]));
    categories[c].assign(unique.begin(), unique.end());
  }

  std::size_t width = 0;
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (c == target_col) continue;
    if (numeric[c]) {
      ds.feature_names.push_back(detail::trim(header[c]));
      ++width;
    } else {
      for (const auto& cat : categories[c]) {
        ds.feature_names.push_back(detail::trim(header[c]) + "=" + cat);
        ++width;
      }
    }
  }

  std::set<std::string> class_set;
  for (const std::size_t r : keep) {
    class_set.insert(detail::trim(rows[r][target_col]));
  }
  ds.class_names.assign(class_set.begin(), class_set.end());
  if (ds.class_names.size() < 2) {
    throw DatasetException(DatasetError::SingleClass,
                           "dataset has fewer than 2 classes");
  }

  ds.x = FeatureTable(keep.size(), width);
  ds.y.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto& row = rows[keep[i]];
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (c == target_col) continue;
      if (numeric[c]) {
        double v;
        detail::parse_number(row[c], v);
        ds.x.at(i, out_c++) = v;
      } else {
        const std::string value = detail::trim(row[c]);
        for (const auto& cat : categories[c]) {
          ds.x.at(i, out_c++) = value == cat ? 1.0 : 0.0;
        }
      }
    }
    const std::string label = detail::trim(row[target_col]);
    ds.y[i] = static_cast<std::size_t>(
        std::lower_bound(ds.class_names.begin(), ds.class_names.end(), label) -
        ds.class_names.begin());
  }

  stratified_split(ds, seed);
  return ds;
}

// Real-data CASH problem over the built-in learner space.
class DatasetProblem : public Problem {
 public:
  explicit DatasetProblem(Dataset dataset, std::string display_name = "")
      : dataset_(std::move(dataset)),
        display_name_(std::move(display_name)),
        space_(builtin_space()) {
    train_x_ = dataset_.gather(dataset_.train_idx);
    train_y_ = dataset_.gather_labels(dataset_.train_idx);
    val_x_ = dataset_.gather(dataset_.val_idx);
    val_y_ = dataset_.gather_labels(dataset_.val_idx);
    test_x_ = dataset_.gather(dataset_.test_idx);
    test_y_ = dataset_.gather_labels(dataset_.test_idx);
  }

  const ConfigSpace& space() const override { return space_; }
  std::size_t n_classes() const override { return dataset_.n_classes(); }
  const std::vector<std::size_t>& val_labels() const override { return val_y_; }
  const std::vector<std::size_t>* test_labels() const override {
    return test_y_.empty() ? nullptr : &test_y_;
  }
  std::string name() const override {
    return display_name_.empty() ? dataset_.source : display_name_;
  }
  const Dataset& dataset() const { return dataset_; }

  EvalOutcome evaluate(const Configuration& config,
                       std::uint64_t seed) const override {
    LabeledData train{&train_x_, &train_y_, dataset_.n_classes()};
    EvalOutcome out;
    if (test_y_.empty()) {
      out.val_predictions =
          train_and_predict_matrix(space_, config, train, val_x_, seed);
      out.val_error = classification_error(out.val_predictions, val_y_);
      out.status = EvalStatus::Ok;
      return out;
    }
    // One training pass scores both splits: predict on val and test rows
    // stacked, then slice the matrix.
    FeatureTable stacked(val_x_.n_rows + test_x_.n_rows, val_x_.n_cols);
    std::copy(val_x_.values.begin(), val_x_.values.end(),
              stacked.values.begin());
    std::copy(test_x_.values.begin(), test_x_.values.end(),
              stacked.values.begin() + val_x_.values.size());
    PredictionMatrix both =
        train_and_predict_matrix(space_, config, train, stacked, seed);
    const std::size_t nc = dataset_.n_classes();
    out.val_predictions = PredictionMatrix(val_x_.n_rows, nc);
    std::copy(both.values.begin(), both.values.begin() + val_x_.n_rows * nc,
              out.val_predictions.values.begin());
    out.test_predictions = PredictionMatrix(test_x_.n_rows, nc);
    std::copy(both.values.begin() + val_x_.n_rows * nc, both.values.end(),
              out.test_predictions.values.begin());
    out.has_test = true;
    out.val_error = classification_error(out.val_predictions, val_y_);
    out.status = EvalStatus::Ok;
    return out;
  }

 private:
  Dataset dataset_;
  std::string display_name_;
  ConfigSpace space_;
  FeatureTable train_x_, val_x_, test_x_;
  std::vector<std::size_t> train_y_, val_y_, test_y_;
};

}  // namespace divbo
