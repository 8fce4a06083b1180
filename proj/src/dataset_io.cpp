#include "svrtune/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "svrtune/errors.hpp"

namespace svrtune {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select_rows(indices);
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.target.reserve(indices.size());
  for (std::size_t i : indices) out.target.push_back(target[i]);
  if (!row_keys.empty()) {
    for (std::size_t i : indices) out.row_keys.push_back(row_keys[i]);
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_number(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LoadResult parse_table(const std::string& text, const TableColumns& columns, char delimiter) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("table is empty");
  const std::vector<std::string> header = split_line(line, delimiter);

  if (columns.target.empty()) throw SchemaError("no target column given");
  const std::size_t target_col = column_index(header, columns.target);
  std::size_t key_col = header.size();
  if (!columns.key.empty()) key_col = column_index(header, columns.key);

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names = columns.features;
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != target_col && c != key_col) feature_names.push_back(header[c]);
    }
  }
  if (feature_names.empty()) throw SchemaError("no feature columns");
  for (const auto& name : feature_names) feature_cols.push_back(column_index(header, name));

  LoadResult result;
  result.data.feature_names = feature_names;
  result.data.target_name = columns.target;
  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line, delimiter);
    if (cells.size() != header.size()) {
      result.rejected.push_back({line_no, "expected " + std::to_string(header.size()) +
                                              " cells, found " + std::to_string(cells.size())});
      continue;
    }
    std::vector<double> row(feature_cols.size());
    std::string bad;
    for (std::size_t k = 0; k < feature_cols.size() && bad.empty(); ++k) {
      if (!parse_number(cells[feature_cols[k]], row[k])) bad = header[feature_cols[k]];
    }
    double target = 0.0;
    if (bad.empty() && !parse_number(cells[target_col], target)) bad = header[target_col];
    if (!bad.empty()) {
      result.rejected.push_back({line_no, "missing or non-numeric value in column '" + bad + "'"});
      continue;
    }
    flat.insert(flat.end(), row.begin(), row.end());
    result.data.target.push_back(target);
    if (key_col < header.size()) result.data.row_keys.push_back(cells[key_col]);
  }
  if (result.data.target.empty()) throw InputError("table has no valid rows");
  result.data.features = Matrix(result.data.target.size(), feature_cols.size(), std::move(flat));
  return result;
}

LoadResult load_table(const std::string& path, const TableColumns& columns, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_table(buf.str(), columns, delimiter);
}

std::string format_table(const Dataset& ds, char delimiter) {
  std::ostringstream out;
  const bool keyed = !ds.row_keys.empty();
  if (keyed) out << "key" << delimiter;
  for (const auto& name : ds.feature_names) out << name << delimiter;
  out << ds.target_name << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (keyed) out << ds.row_keys[i] << delimiter;
    for (double v : ds.features.row(i)) out << format_double(v) << delimiter;
    out << format_double(ds.target[i]) << '\n';
  }
  return out.str();
}

void write_table(const std::string& path, const Dataset& ds, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << format_table(ds, delimiter);
}

ScalingParams fit_minmax(const Dataset& ds) {
  if (ds.size() == 0) throw InputError("fit_minmax: empty dataset");
  ScalingParams p;
  p.features.resize(ds.dim());
  for (std::size_t c = 0; c < ds.dim(); ++c) {
    ColumnRange r{ds.features(0, c), ds.features(0, c)};
    for (std::size_t i = 1; i < ds.size(); ++i) {
      r.min = std::min(r.min, ds.features(i, c));
      r.max = std::max(r.max, ds.features(i, c));
    }
    p.features[c] = r;
  }
  const auto [lo, hi] = std::minmax_element(ds.target.begin(), ds.target.end());
  p.target = {*lo, *hi};
  return p;
}

ScaledDataset apply_minmax(const Dataset& ds, const ScalingParams& params) {
  if (params.features.size() != ds.dim()) throw InputError("apply_minmax: column count mismatch");
  ScaledDataset out{ds, 0};
  auto outside = [](double v) { return v < 0.0 || v > 1.0; };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      const double s = params.features[c].apply(ds.features(i, c));
      out.data.features(i, c) = s;
      out.out_of_unit += outside(s);
    }
    out.data.target[i] = params.target.apply(ds.target[i]);
    out.out_of_unit += outside(out.data.target[i]);
  }
  return out;
}

std::vector<double> invert_target(std::span<const double> values, const ScalingParams& params) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = params.target.invert(values[i]);
  return out;
}

namespace {

Split checked(Split s) {
  if (s.train.size() < 2) throw InputError("split leaves fewer than two training rows");
  if (s.backtest.empty()) throw InputError("split leaves no backtest rows");
  return s;
}

}  // namespace

Split split_by_fraction(const Dataset& ds, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("train fraction must lie in (0, 1)");
  }
  const auto boundary =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.size())));
  Split s;
  for (std::size_t i = 0; i < ds.size(); ++i) (i < boundary ? s.train : s.backtest).push_back(i);
  return checked(std::move(s));
}

Split split_by_key(const Dataset& ds, const std::string& boundary_key) {
  if (ds.row_keys.size() != ds.size()) throw InputError("split_by_key: dataset has no row keys");
  Split s;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (ds.row_keys[i] < boundary_key ? s.train : s.backtest).push_back(i);
  }
  return checked(std::move(s));
}

}  // namespace svrtune
