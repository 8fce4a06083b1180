#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "svrtune/pipeline.hpp"

namespace svrtune {
namespace {

using Json = nlohmann::ordered_json;

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const EvalReport& r) {
  Json j;
  j["rmse"] = number(r.rmse);
  j["mape_percent"] = number(r.mape);
  j["mape_skipped"] = r.mape_skipped;
  j["sedm_as_printed"] = number(r.sedm_paper);
  j["sedm_squared"] = number(r.sedm_var);
  j["n_points"] = r.n_points;
  return j;
}

Json to_json(const Evaluation& e) {
  Json j;
  j["scaled"] = to_json(e.scaled);
  j["original_units"] = to_json(e.original);
  return j;
}

Json to_json(const GridCell& c) {
  Json j;
  j["gamma"] = c.gamma;
  j["C"] = c.C;
  j["epsilon"] = c.epsilon;
  j["train_rmse"] = number(c.train_rmse);
  j["backtest_rmse"] = number(c.backtest_rmse);
  j["cv_rmse"] = number(c.cv_rmse);
  j["converged"] = c.converged;
  return j;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'", "report");
  out << text;
}

}  // namespace

std::string report_json(const TuneReport& report) {
  Json j;
  j["method"] = report.method;
  j["kernel"] = std::string(to_string(report.family));
  j["gamma"] = report.gamma;
  j["C"] = report.C;
  j["epsilon"] = report.epsilon;
  j["gamma_h"] = number(report.gamma_h);
  if (report.gamma_selection) {
    const GammaSelection& g = *report.gamma_selection;
    Json s;
    s["gamma_opt"] = g.gamma_opt;
    s["L_at_opt"] = g.L_at_opt;
    s["L_prime_at_opt"] = g.L_prime_at_opt;
    s["L_second_at_opt"] = g.L_second_at_opt;
    s["newton_iterations"] = g.newton_iterations;
    s["bracket"] = {g.bracket_lo, g.bracket_hi};
    s["converged"] = g.converged;
    j["gamma_selection"] = s;
  }
  j["n_train"] = report.n_train;
  j["n_backtest"] = report.n_backtest;
  j["n_support"] = report.n_support;
  j["train"] = to_json(report.train);
  j["backtest"] = to_json(report.backtest);
  if (report.c_trace) {
    const CIterationTrace& t = *report.c_trace;
    Json c;
    c["c_initial"] = t.c_initial;
    c["c_initial_capped"] = t.c_initial_capped;
    c["c_values"] = t.c_values;
    c["n_support"] = t.n_support;
    c["converged"] = t.converged;
    c["stop_reason"] = std::string(to_string(t.stop_reason));
    c["empty_sets_pathology"] = t.empty_sets_pathology;
    j["c_iteration"] = c;
  }
  if (!report.grid_surface.empty()) {
    j["selection_rule"] = report.selection_rule;
    j["grid_cells"] = report.grid_surface.size();
    if (report.best_backtest_cell) {
      j["best_backtest_cell_diagnostic"] = to_json(*report.best_backtest_cell);
    }
  }
  return j.dump(2) + "\n";
}

void write_report(const TuneReport& report, const std::string& output_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + output_dir + "': " + ec.message(), "report");

  write_file(dir / "report.json", report_json(report));
  if (!report.gamma_curve.empty()) {
    std::ostringstream out;
    out << "gamma,L,L_prime\n";
    for (const CurvePoint& p : report.gamma_curve) {
      out << fmt(p.gamma) << ',' << fmt(p.value) << ',' << fmt(p.first) << '\n';
    }
    write_file(dir / "gamma_curve.csv", out.str());
  }
  if (report.c_trace) {
    std::ostringstream out;
    out << "iteration,C_new\n";
    out << 0 << ',' << fmt(report.c_trace->c_initial) << '\n';
    for (std::size_t k = 0; k < report.c_trace->c_values.size(); ++k) {
      out << k + 1 << ',' << fmt(report.c_trace->c_values[k]) << '\n';
    }
    write_file(dir / "c_trace.csv", out.str());
  }
  if (!report.grid_surface.empty()) {
    std::ostringstream out;
    out << "gamma,C,epsilon,train_rmse,backtest_rmse,cv_rmse,converged\n";
    for (const GridCell& c : report.grid_surface) {
      out << fmt(c.gamma) << ',' << fmt(c.C) << ',' << fmt(c.epsilon) << ',' << fmt(c.train_rmse)
          << ',' << fmt(c.backtest_rmse) << ',' << fmt(c.cv_rmse) << ',' << (c.converged ? 1 : 0)
          << '\n';
    }
    write_file(dir / "grid_surface.csv", out.str());
  }
}

}  // namespace svrtune
