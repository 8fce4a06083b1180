#pragma once

#include <cstddef>
#include <span>

namespace svrtune {

/// max(0, |r| - epsilon)
double epsilon_loss(double residual, double epsilon);

double rmse(std::span<const double> y, std::span<const double> f);

inline constexpr double kMapeZeroTol = 1e-12;

struct MapeResult {
  double percent = 0.0;
  std::size_t skipped = 0;  // targets with |y| <= zero_tol
};

/// Mean absolute percentage error over targets with |y| > zero_tol.
/// Throws DomainError when every target is below the tolerance.
MapeResult mape(std::span<const double> y, std::span<const double> f,
                double zero_tol = kMapeZeroTol);

/// (1/N) sum((r_i - mean r)) evaluated literally. Algebraically zero, so the
/// result measures accumulated round-off.
double sedm_paper(std::span<const double> y, std::span<const double> f);

/// (1/N) sum((r_i - mean r)^2), the residual variance.
double sedm_var(std::span<const double> y, std::span<const double> f);

struct EvalReport {
  double rmse = 0.0;
  double mape = 0.0;  // percent; NaN when undefined
  double sedm_paper = 0.0;
  double sedm_var = 0.0;
  std::size_t n_points = 0;
  std::size_t mape_skipped = 0;
};

EvalReport evaluate(std::span<const double> y, std::span<const double> f);

}  // namespace svrtune
