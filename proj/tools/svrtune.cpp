// svrtune: data-driven epsilon-SVR hyperparameter selection.
//
//   svrtune auto         --data table.csv --target y [--features a,b] [--key date]
//   svrtune grid         ... [--gamma-exp -15:3] [--c-exp -5:15] [--epsilon-grid 0,0.01]
//   svrtune overfit-demo ...
//   svrtune gamma-curve  ... [--curve-lo 1e-4 --curve-hi 1e4 --curve-points 200]
//   svrtune synth        --seed 42 --n-points 200 --noise-sd 0.05 --out data.csv
//
// Every tuning subcommand accepts --synthetic in place of --data to run on
// make_synthetic(--seed, --n-points, --noise-sd).

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "svrtune/pipeline.hpp"

namespace {

using namespace svrtune;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(std::stod(item));
  return out;
}

// "lo:hi" -> 2^lo .. 2^hi
std::vector<double> parse_exponents(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw InputError("exponent range must look like lo:hi");
  return power_of_two_grid(std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1)));
}

struct Options {
  std::string data, target, features, key, delimiter = ",", kernel = "rbf", split_key;
  bool synthetic = false;
  std::uint64_t seed = 42;
  std::size_t n_points = 200;
  double noise_sd = 0.05;
  double epsilon = 0.0;
  double train_fraction = 0.8;
  double gamma_tol = 1e-10, solver_tol = 1e-3, c_delta = 1e-3, kappa = 1e-3, ridge = 1e-8;
  std::size_t c_max_solves = 10, threads = 1, cv_folds = 5;
  std::string gamma_exp = "-15:3", c_exp = "-5:15", gamma_list, c_list, epsilon_grid;
  std::string select = "train-rmse";
  double curve_lo = 0.0, curve_hi = 0.0;
  std::size_t curve_points = 200;
  std::string out = "out";
};

void add_data_options(CLI::App* app, Options& o) {
  app->add_option("--data", o.data, "Delimited table with a header row");
  app->add_option("--target", o.target, "Target column");
  app->add_option("--features", o.features, "Comma-separated feature columns (default: all others)");
  app->add_option("--key", o.key, "Ordering key column");
  app->add_option("--delimiter", o.delimiter, "Field delimiter");
  app->add_flag("--synthetic", o.synthetic, "Use the built-in synthetic series instead of --data");
  app->add_option("--seed", o.seed, "Synthetic series seed");
  app->add_option("--n-points", o.n_points, "Synthetic series length");
  app->add_option("--noise-sd", o.noise_sd, "Synthetic noise standard deviation");
  app->add_option("--kernel", o.kernel, "rbf | mahalanobis")->check(CLI::IsMember({"rbf", "mahalanobis"}));
  app->add_option("--epsilon", o.epsilon, "Tube width on the scaled target");
  app->add_option("--train-fraction", o.train_fraction, "Leading fraction of rows used for training");
  app->add_option("--split-key", o.split_key, "First key of the backtest period");
  app->add_option("--gamma-tol", o.gamma_tol, "Newton tolerance on |L'| (relative)");
  app->add_option("--kappa", o.kappa, "Kernel level defining gamma_h");
  app->add_option("--ridge-scale", o.ridge, "Relative covariance ridge");
  app->add_option("--solver-tol", o.solver_tol, "SMO KKT tolerance");
  app->add_option("--c-delta", o.c_delta, "Relative change stopping the C iteration");
  app->add_option("--c-max-solves", o.c_max_solves, "Maximum solves in the C iteration");
  app->add_option("--out", o.out, "Output directory");
}

RunConfig make_config(const Options& o) {
  RunConfig cfg;
  if (o.synthetic) {
    cfg.dataset = make_synthetic(o.seed, o.n_points, o.noise_sd);
  } else {
    if (o.data.empty() || o.target.empty()) throw InputError("--data and --target are required");
    cfg.data_path = o.data;
    cfg.columns.target = o.target;
    cfg.columns.features = split_list(o.features);
    cfg.columns.key = o.key;
    if (o.delimiter.size() != 1) throw InputError("--delimiter must be a single character");
    cfg.delimiter = o.delimiter[0];
  }
  cfg.family = parse_kernel_family(o.kernel);
  cfg.epsilon = o.epsilon;
  cfg.split.train_fraction = o.train_fraction;
  cfg.split.boundary_key = o.split_key;
  cfg.gamma_search.tol = o.gamma_tol;
  cfg.gamma_search.kappa = o.kappa;
  cfg.ridge_scale = o.ridge;
  cfg.c_iteration.solver.tol = o.solver_tol;
  cfg.c_iteration.delta_tol = o.c_delta;
  cfg.c_iteration.max_solves = o.c_max_solves;
  cfg.gamma_grid = o.gamma_list.empty() ? parse_exponents(o.gamma_exp) : parse_values(o.gamma_list);
  cfg.c_grid = o.c_list.empty() ? parse_exponents(o.c_exp) : parse_values(o.c_list);
  cfg.epsilon_grid = parse_values(o.epsilon_grid);
  cfg.selection = o.select == "cv" ? GridSelection::KFold : GridSelection::TrainRmse;
  cfg.cv_folds = o.cv_folds;
  cfg.threads = o.threads;
  cfg.curve_points = o.curve_points;
  cfg.output_dir = o.out;
  return cfg;
}

void print_rejections(const RunConfig& cfg) {
  if (cfg.dataset) return;
  const LoadResult loaded = load_table(cfg.data_path, cfg.columns, cfg.delimiter);
  for (const RowRejection& r : loaded.rejected) {
    std::cerr << "row " << r.line << ": " << r.reason << '\n';
  }
}

void summarize(const TuneReport& r) {
  std::printf("%s: gamma=%.6g C=%.6g epsilon=%.6g support=%zu\n", r.method.c_str(), r.gamma, r.C,
              r.epsilon, r.n_support);
  std::printf("  train    RMSE=%.6g MAPE=%.4f%%\n", r.train.scaled.rmse, r.train.original.mape);
  std::printf("  backtest RMSE=%.6g MAPE=%.4f%%\n", r.backtest.scaled.rmse, r.backtest.original.mape);
  for (const auto& [stage, secs] : r.timings) std::fprintf(stderr, "  [%s] %.3fs\n", stage.c_str(), secs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven gamma and C selection for epsilon-SVR"};
  app.require_subcommand(1);
  Options o;

  auto* auto_cmd = app.add_subcommand("auto", "Select gamma by the deviation maximum and C by iteration");
  auto* grid_cmd = app.add_subcommand("grid", "Grid-search baseline");
  auto* overfit_cmd = app.add_subcommand("overfit-demo", "Train at gamma_h to show over-fitting");
  auto* curve_cmd = app.add_subcommand("gamma-curve", "Emit samples of the deviation function");
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic dataset");
  for (auto* cmd : {auto_cmd, grid_cmd, overfit_cmd, curve_cmd}) add_data_options(cmd, o);

  grid_cmd->add_option("--gamma-exp", o.gamma_exp, "Gamma grid as power-of-two exponents lo:hi");
  grid_cmd->add_option("--c-exp", o.c_exp, "C grid as power-of-two exponents lo:hi");
  grid_cmd->add_option("--gamma-grid", o.gamma_list, "Explicit comma-separated gamma values");
  grid_cmd->add_option("--c-grid", o.c_list, "Explicit comma-separated C values");
  grid_cmd->add_option("--epsilon-grid", o.epsilon_grid, "Comma-separated epsilon values");
  grid_cmd->add_option("--select", o.select, "train-rmse | cv")->check(CLI::IsMember({"train-rmse", "cv"}));
  grid_cmd->add_option("--cv-folds", o.cv_folds, "Folds for --select cv");
  grid_cmd->add_option("--threads", o.threads, "Worker threads over gamma values");

  curve_cmd->add_option("--curve-lo", o.curve_lo, "Smallest gamma (default 1e-4 * gamma_opt)");
  curve_cmd->add_option("--curve-hi", o.curve_hi, "Largest gamma (default 1e4 * gamma_opt)");
  curve_cmd->add_option("--curve-points", o.curve_points, "Number of samples");

  synth_cmd->add_option("--seed", o.seed, "Seed");
  synth_cmd->add_option("--n-points", o.n_points, "Rows");
  synth_cmd->add_option("--noise-sd", o.noise_sd, "Noise standard deviation");
  synth_cmd->add_option("--out", o.out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      write_table(o.out, make_synthetic(o.seed, o.n_points, o.noise_sd));
      return 0;
    }
    const RunConfig cfg = make_config(o);
    print_rejections(cfg);
    if (curve_cmd->parsed()) {
      double lo = o.curve_lo, hi = o.curve_hi;
      if (lo <= 0.0 || hi <= 0.0) {
        const PreparedData data = prepare(cfg);
        const PairwiseG pg = pairwise_g_values(*data.x_train, cfg.family, data.mstats.get());
        const double center = find_gamma_opt(pg, cfg.gamma_search).gamma_opt;
        if (lo <= 0.0) lo = center * 1e-4;
        if (hi <= 0.0) hi = center * 1e4;
      }
      TuneReport r;
      r.method = "gamma_curve";
      r.family = cfg.family;
      r.gamma_curve = gamma_curve(cfg, lo, hi, o.curve_points);
      std::filesystem::create_directories(cfg.output_dir);
      write_report(r, cfg.output_dir);
      std::filesystem::remove(std::filesystem::path(cfg.output_dir) / "report.json");
      return 0;
    }
    TuneReport report;
    if (auto_cmd->parsed()) report = auto_tune(cfg);
    if (grid_cmd->parsed()) report = grid_search(cfg);
    if (overfit_cmd->parsed()) report = overfit_demo(cfg);
    write_report(report, cfg.output_dir);
    summarize(report);
  } catch (const Error& e) {
    std::cerr << "error" << (e.stage().empty() ? "" : " [" + e.stage() + "]") << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
