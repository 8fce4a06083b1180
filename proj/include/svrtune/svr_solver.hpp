#pragma once

// epsilon-SVR dual
//   min  1/2 (a - a*)^T K (a - a*) + eps sum(a + a*) + sum y (a - a*)
//   s.t. sum(a - a*) = 0,  0 <= a, a* <= C
// with regression function f(x) = sum (a*_i - a_i) K(x_i, x) + b.

#include <cstddef>
#include <list>
#include <memory>
#include <span>
#include <vector>

#include "svrtune/kernels.hpp"

namespace svrtune {

class SvrModel;

struct SolverOptions {
  double tol = 1e-3;             // maximal KKT violation at termination
  std::size_t max_iter = 0;      // 0: max(10^7, 100 N)
  bool verify_psd = true;        // eigenvalue check for externally built Gram matrices
  bool record_objective = false; // keep the dual objective after every iteration
  /// Starting point: this model's coefficients scaled by C / warm_start->C().
  /// Must come from the same training rows.
  const SvrModel* warm_start = nullptr;
};

struct SolveDiagnostics {
  std::size_t iterations = 0;
  double max_kkt_violation = 0.0;
  double dual_objective = 0.0;
  bool converged = false;
  std::vector<double> objective_history;
};

/// Immutable trained model. Coefficients use the variables of the dual above:
/// `alpha[i]` multiplies (a_i) and `alpha_star[i]` multiplies (a*_i).
class SvrModel {
 public:
  SvrModel() = default;
  SvrModel(std::vector<double> alpha, std::vector<double> alpha_star, double bias, double C,
           double epsilon, double solver_tol, KernelSpec spec,
           std::shared_ptr<const Matrix> training_features, std::vector<double> fitted);

  const std::vector<double>& alpha() const noexcept { return alpha_; }
  const std::vector<double>& alpha_star() const noexcept { return alpha_star_; }
  double bias() const noexcept { return bias_; }
  double gamma() const noexcept { return spec_.gamma; }
  double C() const noexcept { return C_; }
  double epsilon() const noexcept { return epsilon_; }
  double solver_tol() const noexcept { return solver_tol_; }
  const KernelSpec& kernel_spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return alpha_.size(); }

  /// a*_i - a_i
  double coefficient(std::size_t i) const { return alpha_star_[i] - alpha_[i]; }
  /// Indices with |a*_i - a_i| > 1e-8 C.
  const std::vector<std::size_t>& sv_indices() const noexcept { return sv_indices_; }
  std::size_t n_support() const noexcept { return sv_indices_.size(); }

  /// f(x_i) at the training points, computed by the solver.
  const std::vector<double>& fitted() const noexcept { return fitted_; }
  const std::shared_ptr<const Matrix>& training_features() const noexcept { return features_; }

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& rows) const;
  /// Predictions from precomputed kernel values K(row r, training point i).
  std::vector<double> predict_from_kernel(const Matrix& kernel_rows) const;

 private:
  std::vector<double> alpha_, alpha_star_;
  double bias_ = 0.0;
  double C_ = 0.0;
  double epsilon_ = 0.0;
  double solver_tol_ = 0.0;
  KernelSpec spec_;
  std::shared_ptr<const Matrix> features_;
  std::vector<double> fitted_;
  std::vector<std::size_t> sv_indices_;
  std::vector<double> sv_coef_;
};

struct SolveResult {
  SvrModel model;
  SolveDiagnostics diagnostics;
};

/// Source of kernel rows for the solver.
class KernelRows {
 public:
  virtual ~KernelRows() = default;
  virtual std::size_t size() const = 0;
  virtual std::span<const double> row(std::size_t i) = 0;
  virtual double diagonal(std::size_t i) const = 0;
};

/// Rows of a precomputed Gram matrix.
class DenseKernelRows final : public KernelRows {
 public:
  explicit DenseKernelRows(const GramMatrix& gram) : gram_(gram) {}
  std::size_t size() const override { return gram_.size(); }
  std::span<const double> row(std::size_t i) override { return gram_.row(i); }
  double diagonal(std::size_t i) const override { return gram_(i, i); }

 private:
  const GramMatrix& gram_;
};

/// Rows computed on demand from the training features and kept in a
/// least-recently-used cache of `capacity` rows. A returned span stays valid
/// until `capacity` further distinct rows are requested.
class CachedKernelRows final : public KernelRows {
 public:
  CachedKernelRows(std::shared_ptr<const Matrix> features, KernelSpec spec, std::size_t capacity);

  std::size_t size() const override { return features_->rows(); }
  std::span<const double> row(std::size_t i) override;
  double diagonal(std::size_t) const override { return 1.0; }

  std::size_t hits() const noexcept { return hits_; }
  std::size_t misses() const noexcept { return misses_; }

 private:
  std::shared_ptr<const Matrix> features_;
  KernelSpec spec_;
  std::size_t capacity_;
  std::list<std::size_t> lru_;  // front = most recent, holds row indices
  std::vector<std::list<std::size_t>::iterator> where_;
  std::vector<std::vector<double>> storage_;
  std::vector<bool> cached_;
  std::size_t hits_ = 0, misses_ = 0;
};

SolveResult solve_dual(const GramMatrix& gram, std::span<const double> y, double C,
                       double epsilon, const SolverOptions& options = {});

/// Same problem, with kernel rows computed lazily through an LRU row cache.
SolveResult solve_dual(std::shared_ptr<const Matrix> features, const KernelSpec& spec,
                       std::span<const double> y, double C, double epsilon,
                       std::size_t cache_rows, const SolverOptions& options = {});

/// Bounded (X_C) and margin (X_M) support vectors.
struct VectorSets {
  std::vector<std::size_t> bounded;
  std::vector<std::size_t> margin;
  /// Margin vectors whose residual differs from epsilon by more than
  /// tau_eps + solver tolerance; reported, not excluded.
  std::size_t residual_mismatches = 0;
};

inline double default_tau_eps(double epsilon) { return std::max(1e-8, 1e-6 * epsilon); }

VectorSets classify_vectors(const SvrModel& model, std::span<const double> y,
                            std::span<const double> predictions, double tau_alpha = 1e-6,
                            double tau_eps = -1.0);

}  // namespace svrtune
