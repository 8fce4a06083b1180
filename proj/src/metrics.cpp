#include "svrtune/metrics.hpp"

#include <cmath>
#include <limits>

#include "svrtune/errors.hpp"

namespace svrtune {
namespace {

void check_lengths(std::span<const double> y, std::span<const double> f, const char* what) {
  if (y.size() != f.size()) throw InputError(std::string(what) + ": length mismatch");
  if (y.empty()) throw InputError(std::string(what) + ": no points");
}

double mean_residual(std::span<const double> y, std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] - f[i];
  return acc / static_cast<double>(y.size());
}

}  // namespace

double epsilon_loss(double residual, double epsilon) {
  const double a = std::abs(residual);
  return a <= epsilon ? 0.0 : a - epsilon;
}

double rmse(std::span<const double> y, std::span<const double> f) {
  check_lengths(y, f, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - f[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

MapeResult mape(std::span<const double> y, std::span<const double> f, double zero_tol) {
  check_lengths(y, f, "mape");
  MapeResult out;
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::abs(y[i]) <= zero_tol) {
      ++out.skipped;
      continue;
    }
    acc += std::abs((y[i] - f[i]) / y[i]);
    ++used;
  }
  if (used == 0) throw DomainError("mape: every target is zero");
  out.percent = 100.0 * acc / static_cast<double>(used);
  return out;
}

double sedm_paper(std::span<const double> y, std::span<const double> f) {
  check_lengths(y, f, "sedm");
  const double mu = mean_residual(y, f);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - f[i]) - mu;
  return acc / static_cast<double>(y.size());
}

double sedm_var(std::span<const double> y, std::span<const double> f) {
  check_lengths(y, f, "sedm");
  const double mu = mean_residual(y, f);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = (y[i] - f[i]) - mu;
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

EvalReport evaluate(std::span<const double> y, std::span<const double> f) {
  EvalReport r;
  r.rmse = rmse(y, f);
  r.sedm_paper = sedm_paper(y, f);
  r.sedm_var = sedm_var(y, f);
  r.n_points = y.size();
  try {
    const MapeResult m = mape(y, f);
    r.mape = m.percent;
    r.mape_skipped = m.skipped;
  } catch (const DomainError&) {
    r.mape = std::numeric_limits<double>::quiet_NaN();
    r.mape_skipped = y.size();
  }
  return r;
}

}  // namespace svrtune
