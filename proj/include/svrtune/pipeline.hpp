#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svrtune/c_selection.hpp"
#include "svrtune/dataset_io.hpp"
#include "svrtune/deviation.hpp"
#include "svrtune/metrics.hpp"

namespace svrtune {

/// Powers of two 2^lo, ..., 2^hi.
std::vector<double> power_of_two_grid(int lo_exponent, int hi_exponent);
std::vector<double> default_gamma_grid();  // 2^-15 .. 2^3
std::vector<double> default_c_grid();      // 2^-5 .. 2^15

enum class GridSelection { TrainRmse, KFold };

struct SplitSpec {
  double train_fraction = 0.8;
  std::string boundary_key;  // non-empty: split by key instead of fraction
};

struct RunConfig {
  std::string data_path;
  TableColumns columns;
  char delimiter = ',';
  std::optional<Dataset> dataset;  // used instead of data_path when set

  KernelFamily family = KernelFamily::RBF;
  double epsilon = 0.0;
  SplitSpec split;

  GammaSearchOptions gamma_search;
  double ridge_scale = kDefaultRidgeScale;
  CIterationOptions c_iteration;
  std::size_t curve_points = 200;

  std::vector<double> gamma_grid = default_gamma_grid();
  std::vector<double> c_grid = default_c_grid();
  std::vector<double> epsilon_grid;  // empty: {epsilon}
  GridSelection selection = GridSelection::TrainRmse;
  std::size_t cv_folds = 5;
  std::size_t threads = 1;

  std::string output_dir;
};

/// Loaded, split and scaled data. Scaling is fitted on the training rows.
struct PreparedData {
  Dataset raw;
  Split split;
  ScalingParams scaling;
  std::size_t backtest_out_of_unit = 0;
  std::shared_ptr<const Matrix> x_train;
  Matrix x_backtest;
  std::vector<double> y_train, y_backtest;  // scaled
  std::shared_ptr<const MahalanobisStats> mstats;

  KernelSpec spec(double gamma) const;
};

PreparedData prepare(const RunConfig& config);

struct Evaluation {
  EvalReport scaled;
  EvalReport original;  // after inverting the target scaling
};

struct GridCell {
  double gamma = 0.0;
  double C = 0.0;
  double epsilon = 0.0;
  double train_rmse = 0.0;
  double backtest_rmse = 0.0;
  double cv_rmse = 0.0;  // NaN unless k-fold selection ran
  std::size_t iterations = 0;
  bool converged = false;
};

struct TuneReport {
  std::string method;  // auto | grid | overfit_demo
  KernelFamily family = KernelFamily::RBF;
  double gamma = 0.0;
  double C = 0.0;
  double epsilon = 0.0;
  double gamma_h = 0.0;
  std::optional<GammaSelection> gamma_selection;
  std::size_t n_train = 0;
  std::size_t n_backtest = 0;
  std::size_t n_support = 0;
  Evaluation train, backtest;

  std::vector<CurvePoint> gamma_curve;
  std::optional<CIterationTrace> c_trace;
  std::vector<GridCell> grid_surface;
  std::string selection_rule;
  /// Cell with the lowest backtest RMSE. Uses the backtest for selection, so
  /// it is a diagnostic only.
  std::optional<GridCell> best_backtest_cell;

  /// Wall-clock seconds per stage. Not written to report files.
  std::vector<std::pair<std::string, double>> timings;
};

TuneReport auto_tune(const RunConfig& config);
TuneReport overfit_demo(const RunConfig& config);
TuneReport grid_search(const RunConfig& config, const std::vector<double>& gamma_grid,
                       const std::vector<double>& c_grid,
                       const std::vector<double>& epsilon_grid = {});
inline TuneReport grid_search(const RunConfig& config) {
  return grid_search(config, config.gamma_grid, config.c_grid, config.epsilon_grid);
}

/// Samples of L over the training rows of `config`.
std::vector<CurvePoint> gamma_curve(const RunConfig& config, double lo, double hi,
                                    std::size_t count);

/// Deterministic synthetic series standing in for a daily consumption table.
///
/// For t = 0..n-1, with phase ~ U[0, 2 pi) and period ~ U[45, 60] drawn from
/// a std::mt19937_64 seeded with `seed`:
///   driver  = sin(2 pi t / period + phase)
///   trend   = t / (n - 1)
///   weekday = t mod 7
///   y = 2 + 1.2 driver + 0.6 cos(pi driver) + 0.3 [weekday >= 5] + 0.4 trend
///       + noise_sd * N(0, 1)
/// Row keys are "t00000", "t00001", ...
Dataset make_synthetic(std::uint64_t seed, std::size_t n_points, double noise_sd);

/// Writes report.json plus gamma_curve.csv, c_trace.csv and grid_surface.csv
/// for the parts present in `report`.
void write_report(const TuneReport& report, const std::string& output_dir);
std::string report_json(const TuneReport& report);

}  // namespace svrtune
