#pragma once

// Deviation of pairwise feature-space distances as a function of the kernel
// width, and the width that maximizes it.
//
// For a pair with base distance G the mapped distance under exp(-gamma*G) is
//   l(gamma) = sqrt(2 - 2 exp(-gamma G)),
// with derivatives
//   d(gamma)  = l' = G exp(-gamma G) / l,
//   d'(gamma)      = -G d (1 + exp(-gamma G) / l^2).
// L(gamma) is the variance of l over all pairs; L' = 2 cov(l, d) and
// L'' = 2 var(d) + 2 cov(l, d').

#include <cstddef>
#include <optional>
#include <vector>

#include "svrtune/kernels.hpp"

namespace svrtune {

/// All pairwise G values of a training set, sorted ascending. Sorting makes
/// every reduction over pairs independent of the row order of the data.
struct PairwiseG {
  std::vector<double> values;
  std::size_t n_points = 0;

  std::size_t pair_count() const noexcept { return values.size(); }
  /// 1 / (N (N - 1)), the weight of each ordered pair.
  double weight() const noexcept {
    return 1.0 / (static_cast<double>(n_points) * static_cast<double>(n_points - 1));
  }
};

PairwiseG pairwise_g_values(const Matrix& features, KernelFamily family,
                            const MahalanobisStats* stats = nullptr);
PairwiseG pairwise_g_values(const Matrix& features, const KernelSpec& spec);

/// Derivative evaluations below this width are refused (d diverges as gamma -> 0).
inline constexpr double kGammaFloor = 1e-12;

struct DeviationValues {
  double value = 0.0;   // L
  double first = 0.0;   // L'
  double second = 0.0;  // L''
};

double deviation_L(double gamma, const PairwiseG& pg);
double deviation_L_prime(double gamma, const PairwiseG& pg);
double deviation_L_second(double gamma, const PairwiseG& pg);
/// L, L' and L'' from one pass over the pairs.
DeviationValues deviation_all(double gamma, const PairwiseG& pg);

struct GammaSearchOptions {
  double tol = 1e-10;           // on |L'|, relative to the scan's max |L'|
  std::size_t max_iter = 100;
  double scan_lo = 1e-6;
  double scan_hi = 1e6;
  std::size_t scan_points = 64;
  double kappa = 1e-3;          // for the reported gamma_h
};

struct GammaSelection {
  double gamma_opt = 0.0;
  double gamma_h = 0.0;
  double L_at_opt = 0.0;
  double L_prime_at_opt = 0.0;
  double L_second_at_opt = 0.0;
  double derivative_scale = 0.0;  // max |L'| over the scan
  std::size_t newton_iterations = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  bool converged = false;
};

/// Maximizer of L by safeguarded Newton on L' inside a sign-change bracket
/// located by a logarithmic scan. When the scan finds several maxima the one
/// with the largest L wins.
GammaSelection find_gamma_opt(const PairwiseG& pg, const GammaSearchOptions& options = {});

/// Smallest gamma at which every off-diagonal kernel entry is <= kappa:
/// ln(1/kappa) / G_min over strictly positive G.
double find_gamma_h(const PairwiseG& pg, double kappa = 1e-3);

struct CurvePoint {
  double gamma = 0.0;
  double value = 0.0;
  double first = 0.0;
};

/// (gamma, L, L') on `count` log-spaced points over [lo, hi].
std::vector<CurvePoint> sample_deviation_curve(const PairwiseG& pg, double lo, double hi,
                                               std::size_t count);

}  // namespace svrtune
