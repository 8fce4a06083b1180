#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "svrtune/matrix.hpp"

namespace svrtune {

struct Dataset {
  Matrix features;
  std::vector<double> target;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  std::vector<std::string> row_keys;  // empty when the table has no key column

  std::size_t size() const noexcept { return target.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  Dataset subset(std::span<const std::size_t> indices) const;
};

struct RowRejection {
  std::size_t line = 0;  // 1-based line number in the file, header is line 1
  std::string reason;
};

struct LoadResult {
  Dataset data;
  std::vector<RowRejection> rejected;
};

struct TableColumns {
  std::string target;
  std::vector<std::string> features;  // empty: every column except target and key
  std::string key;                    // empty: no key column
};

/// Reads a delimited text table with a header row. Rows with a missing or
/// non-numeric cell in a selected column are rejected and reported.
LoadResult load_table(const std::string& path, const TableColumns& columns, char delimiter = ',');
LoadResult parse_table(const std::string& text, const TableColumns& columns, char delimiter = ',');

/// Writes `ds` in the format load_table reads, with round-trip precision.
void write_table(const std::string& path, const Dataset& ds, char delimiter = ',');
std::string format_table(const Dataset& ds, char delimiter = ',');

struct ColumnRange {
  double min = 0.0;
  double max = 0.0;
  bool constant() const noexcept { return max == min; }
  double apply(double v) const noexcept { return constant() ? 0.0 : (v - min) / (max - min); }
  double invert(double s) const noexcept { return constant() ? min : min + s * (max - min); }
};

struct ScalingParams {
  std::vector<ColumnRange> features;
  ColumnRange target;
};

/// Column ranges of every row in `ds` (pass the training rows only).
ScalingParams fit_minmax(const Dataset& ds);

struct ScaledDataset {
  Dataset data;
  std::size_t out_of_unit = 0;  // scaled cells outside [0, 1]
};

ScaledDataset apply_minmax(const Dataset& ds, const ScalingParams& params);
std::vector<double> invert_target(std::span<const double> values, const ScalingParams& params);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> backtest;
};

/// First floor(fraction * N) rows train, the rest backtest.
Split split_by_fraction(const Dataset& ds, double train_fraction);
/// Rows whose key orders before `boundary_key` train, the rest backtest.
Split split_by_key(const Dataset& ds, const std::string& boundary_key);

}  // namespace svrtune
