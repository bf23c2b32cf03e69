#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "traitscale/error.hpp"

namespace traitscale {

/// Missing values are quiet NaN in memory, empty cells on disk.
inline constexpr double kMissingValue = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

enum class ColumnKind { Numeric, Categorical };

/// One predictor column. Categorical columns carry their level
/// vocabulary; cell values are level indices stored as doubles.
struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;

  int category_code(std::string_view label) const {
    for (size_t i = 0; i < categories.size(); ++i)
      if (categories[i] == label) return static_cast<int>(i);
    return -1;
  }
};

struct ColumnSchema {
  std::vector<ColumnSpec> columns;

  size_t size() const { return columns.size(); }

  int index_of(std::string_view name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return static_cast<int>(i);
    return -1;
  }

  const ColumnSpec& at(size_t i) const {
    if (i >= columns.size()) throw Error("schema: column index out of range");
    return columns[i];
  }

  bool operator==(const ColumnSchema& other) const {
    if (columns.size() != other.columns.size()) return false;
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name != other.columns[i].name ||
          columns[i].kind != other.columns[i].kind ||
          columns[i].categories != other.columns[i].categories)
        return false;
    }
    return true;
  }
};

}  // namespace traitscale
