#pragma once

// Regularization constant from the data: a worst-case lower bound
//   C_ini = max_{i,j} |y_i - y_j| exp(gamma G(x_i, x_j))
// refined by the fixed-point update
//   C_new = (N + N_s) / (sum_{X_C} L_eps(r_i) + sum_{X_M} 1 / (C - |a_i - a*_i|)
//                        + eps N / (eps C + 1))
// applied after each solve.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "svrtune/svr_solver.hpp"

namespace svrtune {

inline constexpr double kCMax = 1e6;
inline constexpr double kCFloor = 1e-6;
inline constexpr double kMarginTermMax = 1e12;
inline constexpr double kDenominatorFloor = 1e-12;

struct InitialC {
  double value = 0.0;
  bool capped = false;   // bound exceeded kCMax
  bool floored = false;  // all targets equal, or bound below kCFloor
};

/// Evaluated in log space; `spec` supplies gamma and the distance family.
InitialC initial_c(const Matrix& features, std::span<const double> y, const KernelSpec& spec);

struct CUpdate {
  double value = 0.0;  // the new C; equals the input C when guarded
  bool guarded = false;
  double denominator = 0.0;
  std::size_t n_support = 0;  // |X_C| + |X_M|
};

CUpdate update_c(const SvrModel& model, std::span<const double> y,
                 std::span<const double> predictions, double epsilon, double C,
                 const VectorSets& sets);

enum class CStopReason { DeltaSmall, MaxIter, DenominatorGuard, SolverFailure };

std::string_view to_string(CStopReason reason) noexcept;

struct CIterationOptions {
  double delta_tol = 1e-3;
  std::size_t max_solves = 10;
  std::optional<double> c_initial;  // overrides initial_c
  double tau_alpha = 1e-6;
  SolverOptions solver;
};

struct CIterationTrace {
  double c_initial = 0.0;
  bool c_initial_capped = false;
  std::vector<double> c_values;   // C_new after each solve
  std::vector<std::size_t> n_support;
  std::vector<std::size_t> solver_iterations;
  bool converged = false;
  CStopReason stop_reason = CStopReason::MaxIter;
  /// Every solve found no support vectors; the update then grows C by 1/eps
  /// forever and has no fixed point.
  bool empty_sets_pathology = false;
  std::optional<SvrModel> final_model;  // last converged solve

  /// Value to train the final model with.
  double selected() const { return c_values.empty() ? c_initial : c_values.back(); }
};

/// Alternates solve and update starting from initial_c (or the override) on
/// a Gram matrix of the training rows.
CIterationTrace iterate_c(const GramMatrix& gram, std::span<const double> y, double epsilon,
                          const CIterationOptions& options = {});

}  // namespace svrtune
