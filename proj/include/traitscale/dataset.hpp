#pragma once

#include <span>
#include <vector>

#include "traitscale/schema.hpp"

namespace traitscale {

/// Column-major table of mixed numeric/categorical predictors with
/// explicit missingness (NaN). Immutable row count once built via
/// resize_rows/append_row; used as the feature container for forests.
class DataTable {
 public:
  DataTable() = default;
  explicit DataTable(ColumnSchema schema) : schema_(std::move(schema)) {
    cols_.resize(schema_.size());
  }

  const ColumnSchema& schema() const { return schema_; }
  size_t n_rows() const { return n_rows_; }
  size_t n_cols() const { return schema_.size(); }

  double at(size_t row, size_t col) const { return cols_[col][row]; }
  void set(size_t row, size_t col, double v) { cols_[col][row] = v; }

  const std::vector<double>& column(size_t col) const { return cols_[col]; }

  std::vector<double> row(size_t r) const {
    std::vector<double> out(n_cols());
    for (size_t c = 0; c < n_cols(); ++c) out[c] = cols_[c][r];
    return out;
  }

  void resize_rows(size_t n) {
    n_rows_ = n;
    for (auto& c : cols_) c.assign(n, kMissingValue);
  }

  void append_row(std::span<const double> values) {
    if (values.size() != n_cols()) throw Error("DataTable: row width mismatch");
    for (size_t c = 0; c < n_cols(); ++c) cols_[c].push_back(values[c]);
    ++n_rows_;
  }

 private:
  ColumnSchema schema_;
  size_t n_rows_ = 0;
  std::vector<std::vector<double>> cols_;
};

}  // namespace traitscale
