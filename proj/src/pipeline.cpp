#include "svrtune/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

namespace svrtune {

std::vector<double> power_of_two_grid(int lo_exponent, int hi_exponent) {
  if (hi_exponent < lo_exponent) throw InputError("empty power-of-two grid");
  std::vector<double> out;
  for (int e = lo_exponent; e <= hi_exponent; ++e) out.push_back(std::ldexp(1.0, e));
  return out;
}

std::vector<double> default_gamma_grid() { return power_of_two_grid(-15, 3); }
std::vector<double> default_c_grid() { return power_of_two_grid(-5, 15); }

KernelSpec PreparedData::spec(double gamma) const {
  if (mstats) return KernelSpec::mahalanobis(gamma, mstats);
  return KernelSpec::rbf(gamma);
}

namespace {

template <typename F>
auto staged(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (Error& e) {
    if (e.stage().empty()) e.set_stage(stage);
    throw;
  } catch (const std::exception& e) {
    throw Error(e.what(), stage);
  }
}

class StageTimer {
 public:
  explicit StageTimer(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}
  void mark(const char* stage) {
    const auto now = std::chrono::steady_clock::now();
    sink_.emplace_back(stage, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }

 private:
  std::vector<std::pair<std::string, double>>& sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

Evaluation evaluate_both(std::span<const double> y_scaled, std::span<const double> f_scaled,
                         const ScalingParams& scaling) {
  Evaluation ev;
  ev.scaled = evaluate(y_scaled, f_scaled);
  const std::vector<double> y = invert_target(y_scaled, scaling);
  const std::vector<double> f = invert_target(f_scaled, scaling);
  ev.original = evaluate(y, f);
  return ev;
}

// Final solve at (gamma, C) plus train/backtest evaluation.
void fit_and_evaluate(const PreparedData& data, const GramMatrix& gram, double C, double epsilon,
                      const SolverOptions& solver, TuneReport& report) {
  const SolveResult res = solve_dual(gram, data.y_train, C, epsilon, solver);
  if (!res.diagnostics.converged) throw Error("final solve did not converge");
  const SvrModel& model = res.model;
  const std::vector<double> f_backtest = model.predict(data.x_backtest);
  report.n_support = model.n_support();
  report.train = evaluate_both(data.y_train, model.fitted(), data.scaling);
  report.backtest = evaluate_both(data.y_backtest, f_backtest, data.scaling);
}

double clamp_c(double c) { return std::clamp(c, kCFloor, kCMax); }

TuneReport tune_at_gamma(const RunConfig& config, const PreparedData& data, const PairwiseG& pg,
                         double gamma, const char* method, StageTimer& timer,
                         TuneReport report) {
  report.method = method;
  report.family = config.family;
  report.epsilon = config.epsilon;
  report.gamma = gamma;
  report.n_train = data.y_train.size();
  report.n_backtest = data.y_backtest.size();

  const GramMatrix gram =
      staged("gram", [&] { return gram_matrix(data.x_train, data.spec(gamma)); });
  CIterationTrace trace =
      staged("c_selection", [&] { return iterate_c(gram, data.y_train, config.epsilon, config.c_iteration); });
  timer.mark("c_selection");
  if (trace.stop_reason == CStopReason::SolverFailure && trace.c_values.empty()) {
    throw Error("solver did not converge at the initial C", "c_selection");
  }
  report.C = clamp_c(trace.selected());
  trace.final_model.reset();
  report.c_trace = std::move(trace);

  staged("evaluate", [&] {
    fit_and_evaluate(data, gram, report.C, config.epsilon, config.c_iteration.solver, report);
  });
  timer.mark("evaluate");

  if (config.curve_points >= 2) {
    const double center = report.gamma_selection ? report.gamma_selection->gamma_opt : gamma;
    report.gamma_curve = staged("gamma_curve", [&] {
      return sample_deviation_curve(pg, center * 1e-4, center * 1e4, config.curve_points);
    });
  }
  return report;
}

}  // namespace

PreparedData prepare(const RunConfig& config) {
  return staged("load", [&] {
    PreparedData data;
    if (config.dataset) {
      data.raw = *config.dataset;
    } else {
      data.raw = load_table(config.data_path, config.columns, config.delimiter).data;
    }
    data.split = config.split.boundary_key.empty()
                     ? split_by_fraction(data.raw, config.split.train_fraction)
                     : split_by_key(data.raw, config.split.boundary_key);
    const Dataset train = data.raw.subset(data.split.train);
    const Dataset backtest = data.raw.subset(data.split.backtest);
    data.scaling = fit_minmax(train);
    ScaledDataset train_s = apply_minmax(train, data.scaling);
    ScaledDataset back_s = apply_minmax(backtest, data.scaling);
    data.backtest_out_of_unit = back_s.out_of_unit;
    data.x_train = std::make_shared<const Matrix>(std::move(train_s.data.features));
    data.y_train = std::move(train_s.data.target);
    data.x_backtest = std::move(back_s.data.features);
    data.y_backtest = std::move(back_s.data.target);
    if (config.family == KernelFamily::Mahalanobis) {
      data.mstats = std::make_shared<const MahalanobisStats>(
          mahalanobis_statistics(*data.x_train, config.ridge_scale));
      if (data.mstats->degenerate) throw DegenerateError("all training rows are identical");
    }
    return data;
  });
}

TuneReport auto_tune(const RunConfig& config) {
  TuneReport report;
  StageTimer timer(report.timings);
  const PreparedData data = prepare(config);
  timer.mark("load");
  const PairwiseG pg = staged("pairwise", [&] {
    return pairwise_g_values(*data.x_train, config.family, data.mstats.get());
  });
  timer.mark("pairwise");
  const GammaSelection sel = staged("gamma", [&] { return find_gamma_opt(pg, config.gamma_search); });
  timer.mark("gamma");
  report.gamma_selection = sel;
  report.gamma_h = sel.gamma_h;
  return tune_at_gamma(config, data, pg, sel.gamma_opt, "auto", timer, std::move(report));
}

TuneReport overfit_demo(const RunConfig& config) {
  TuneReport report;
  StageTimer timer(report.timings);
  const PreparedData data = prepare(config);
  timer.mark("load");
  const PairwiseG pg = staged("pairwise", [&] {
    return pairwise_g_values(*data.x_train, config.family, data.mstats.get());
  });
  timer.mark("pairwise");
  const double gamma_h = staged("gamma", [&] { return find_gamma_h(pg, config.gamma_search.kappa); });
  timer.mark("gamma");
  report.gamma_h = gamma_h;
  return tune_at_gamma(config, data, pg, gamma_h, "overfit_demo", timer, std::move(report));
}

std::vector<CurvePoint> gamma_curve(const RunConfig& config, double lo, double hi,
                                    std::size_t count) {
  const PreparedData data = prepare(config);
  const PairwiseG pg = staged("pairwise", [&] {
    return pairwise_g_values(*data.x_train, config.family, data.mstats.get());
  });
  return staged("gamma_curve", [&] { return sample_deviation_curve(pg, lo, hi, count); });
}

namespace {

// Contiguous k-fold RMSE on the training rows for one cell.
double kfold_rmse(const GramMatrix& gram, std::span<const double> y, double C, double epsilon,
                  std::size_t folds, const SolverOptions& solver) {
  const std::size_t n = y.size();
  folds = std::min(folds, n);
  if (folds < 2) throw InputError("k-fold selection needs at least two folds");
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t lo = f * n / folds, hi = (f + 1) * n / folds;
    std::vector<std::size_t> fit;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < lo || i >= hi) fit.push_back(i);
    }
    Matrix sub(fit.size(), fit.size());
    std::vector<double> ysub(fit.size());
    for (std::size_t a = 0; a < fit.size(); ++a) {
      ysub[a] = y[fit[a]];
      for (std::size_t b = 0; b < fit.size(); ++b) sub(a, b) = gram(fit[a], fit[b]);
    }
    SolverOptions opt = solver;
    opt.verify_psd = false;  // principal submatrix of a PSD matrix
    const SolveResult res = solve_dual(GramMatrix(std::move(sub), gram.spec()), ysub, C, epsilon, opt);
    if (!res.diagnostics.converged) return std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = lo; i < hi; ++i) {
      double acc = res.model.bias();
      for (std::size_t a = 0; a < fit.size(); ++a) acc += res.model.coefficient(a) * gram(i, fit[a]);
      sq += (y[i] - acc) * (y[i] - acc);
      ++count;
    }
  }
  return std::sqrt(sq / static_cast<double>(count));
}

}  // namespace

TuneReport grid_search(const RunConfig& config, const std::vector<double>& gamma_grid,
                       const std::vector<double>& c_grid,
                       const std::vector<double>& epsilon_grid_in) {
  TuneReport report;
  StageTimer timer(report.timings);
  const std::vector<double> epsilon_grid =
      epsilon_grid_in.empty() ? std::vector<double>{config.epsilon} : epsilon_grid_in;
  if (gamma_grid.empty() || c_grid.empty()) throw InputError("grid_search: empty grid", "grid");
  const PreparedData data = prepare(config);
  timer.mark("load");

  const std::size_t per_gamma = c_grid.size() * epsilon_grid.size();
  std::vector<GridCell> cells(gamma_grid.size() * per_gamma);
  const SolverOptions& solver = config.c_iteration.solver;

  auto run_gamma = [&](std::size_t gi) {
    const double gamma = gamma_grid[gi];
    const KernelSpec spec = data.spec(gamma);
    const GramMatrix gram = gram_matrix(data.x_train, spec);
    const Matrix k_back = cross_kernel(data.x_backtest, *data.x_train, spec);
    for (std::size_t ei = 0; ei < epsilon_grid.size(); ++ei) {
      // Each C starts from the previous converged solution of the row.
      std::optional<SvrModel> previous;
      for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
        GridCell& cell = cells[gi * per_gamma + ei * c_grid.size() + ci];
        cell.gamma = gamma;
        cell.C = c_grid[ci];
        cell.epsilon = epsilon_grid[ei];
        cell.cv_rmse = std::numeric_limits<double>::quiet_NaN();
        SolverOptions opts = solver;
        opts.warm_start = previous ? &*previous : nullptr;
        SolveResult res = solve_dual(gram, data.y_train, cell.C, cell.epsilon, opts);
        cell.iterations = res.diagnostics.iterations;
        cell.converged = res.diagnostics.converged;
        cell.train_rmse = rmse(data.y_train, res.model.fitted());
        cell.backtest_rmse = rmse(data.y_backtest, res.model.predict_from_kernel(k_back));
        if (config.selection == GridSelection::KFold && cell.converged) {
          cell.cv_rmse = kfold_rmse(gram, data.y_train, cell.C, cell.epsilon, config.cv_folds, solver);
        }
        if (res.diagnostics.converged) previous = std::move(res.model);
      }
    }
  };

  staged("grid", [&] {
    const std::size_t n_threads =
        std::clamp<std::size_t>(config.threads, 1, std::max<std::size_t>(gamma_grid.size(), 1));
    if (n_threads == 1) {
      for (std::size_t gi = 0; gi < gamma_grid.size(); ++gi) run_gamma(gi);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t gi = next++; gi < gamma_grid.size(); gi = next++) {
          try {
            run_gamma(gi);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  });
  timer.mark("grid");

  auto score = [&](const GridCell& c) {
    return config.selection == GridSelection::KFold ? c.cv_rmse : c.train_rmse;
  };
  const GridCell* chosen = nullptr;
  const GridCell* oracle = nullptr;
  for (const GridCell& c : cells) {
    if (!c.converged) continue;
    if (std::isfinite(score(c)) && (chosen == nullptr || score(c) < score(*chosen))) chosen = &c;
    if (oracle == nullptr || c.backtest_rmse < oracle->backtest_rmse) oracle = &c;
  }
  if (chosen == nullptr) throw Error("no grid cell converged", "grid");

  report.method = "grid";
  report.family = config.family;
  report.gamma = chosen->gamma;
  report.C = chosen->C;
  report.epsilon = chosen->epsilon;
  report.n_train = data.y_train.size();
  report.n_backtest = data.y_backtest.size();
  report.selection_rule = config.selection == GridSelection::KFold ? "kfold_cv_rmse" : "train_rmse";
  report.best_backtest_cell = *oracle;
  report.grid_surface = std::move(cells);
  chosen = nullptr;
  oracle = nullptr;

  staged("evaluate", [&] {
    const GramMatrix gram = gram_matrix(data.x_train, data.spec(report.gamma));
    fit_and_evaluate(data, gram, report.C, report.epsilon, solver, report);
  });
  timer.mark("evaluate");
  return report;
}

Dataset make_synthetic(std::uint64_t seed, std::size_t n_points, double noise_sd) {
  if (n_points < 10) throw InputError("make_synthetic needs at least 10 points");
  if (!(noise_sd >= 0.0)) throw InputError("make_synthetic: noise_sd must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double period = 45.0 + 15.0 * unit(rng);

  Dataset ds;
  ds.feature_names = {"driver", "trend", "weekday"};
  ds.target_name = "y";
  ds.features = Matrix(n_points, 3);
  ds.target.resize(n_points);
  ds.row_keys.resize(n_points);
  for (std::size_t t = 0; t < n_points; ++t) {
    const double tt = static_cast<double>(t);
    const double driver = std::sin(2.0 * std::numbers::pi * tt / period + phase);
    const double trend = tt / static_cast<double>(n_points - 1);
    const double weekday = static_cast<double>(t % 7);
    ds.features(t, 0) = driver;
    ds.features(t, 1) = trend;
    ds.features(t, 2) = weekday;
    const double clean = 2.0 + 1.2 * driver + 0.6 * std::cos(std::numbers::pi * driver) +
                         0.3 * (weekday >= 5.0 ? 1.0 : 0.0) + 0.4 * trend;
    const double z = noise(rng);
    ds.target[t] = clean + noise_sd * z;
    char key[32];
    std::snprintf(key, sizeof key, "t%05zu", t);
    ds.row_keys[t] = key;
  }
  return ds;
}

}  // namespace svrtune
