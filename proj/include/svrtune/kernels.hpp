#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string_view>

#include "svrtune/matrix.hpp"

namespace svrtune {

enum class KernelFamily { RBF, Mahalanobis };

std::string_view to_string(KernelFamily family) noexcept;
KernelFamily parse_kernel_family(std::string_view name);

/// Covariance statistics for the Mahalanobis kernel, computed from the
/// training features.
struct MahalanobisStats {
  Matrix covariance;       // Q, population normalization
  Matrix inverse;          // (Q + ridge*I)^-1
  std::vector<double> center;
  double m = 0.0;          // mean of (x_k - c)^T Qinv (x_k - c)
  double ridge = 0.0;      // what was added to the diagonal (0 if Q was invertible)
  bool degenerate = false; // every training row identical

  std::size_t dim() const noexcept { return center.size(); }
};

struct KernelSpec {
  KernelFamily family = KernelFamily::RBF;
  double gamma = 1.0;
  std::shared_ptr<const MahalanobisStats> mstats;

  static KernelSpec rbf(double gamma) { return {KernelFamily::RBF, gamma, nullptr}; }
  static KernelSpec mahalanobis(double gamma, std::shared_ptr<const MahalanobisStats> stats) {
    return {KernelFamily::Mahalanobis, gamma, std::move(stats)};
  }

  KernelSpec with_gamma(double g) const {
    KernelSpec out = *this;
    out.gamma = g;
    return out;
  }

  /// Throws InputError unless gamma > 0 and Mahalanobis specs carry stats of
  /// dimension `dim`.
  void validate(std::size_t dim) const;
};

double squared_euclidean(std::span<const double> a, std::span<const double> b);

/// Relative ridge scale used when the covariance is numerically singular.
inline constexpr double kDefaultRidgeScale = 1e-8;

MahalanobisStats mahalanobis_statistics(const Matrix& features,
                                        double ridge_scale = kDefaultRidgeScale);

double mahalanobis_g(std::span<const double> a, std::span<const double> b,
                     const MahalanobisStats& stats);

/// G(a, b) for the family of `spec` (gamma is not used).
double pair_g(std::span<const double> a, std::span<const double> b, const KernelSpec& spec);

/// exp(-gamma * g). Underflows to 0 for very large arguments.
inline double kernel_value(double g, double gamma) noexcept { return std::exp(-gamma * g); }

/// Symmetric kernel matrix over a set of training rows. Keeps a shared copy of
/// the rows so models solved from it can predict new points.
class GramMatrix {
 public:
  GramMatrix() = default;

  /// Wraps externally supplied entries. Checks squareness and symmetry only;
  /// positive semidefiniteness is checked by the solver.
  GramMatrix(Matrix entries, KernelSpec spec);

  std::size_t size() const noexcept { return entries_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  std::span<const double> row(std::size_t i) const { return entries_.row(i); }
  const Matrix& entries() const noexcept { return entries_; }
  const KernelSpec& spec() const noexcept { return spec_; }

  /// Training rows the matrix was built from; null for wrapped entries.
  const std::shared_ptr<const Matrix>& features() const noexcept { return features_; }

  /// True when built by gram_matrix(), which produces a PSD matrix by construction.
  bool psd_by_construction() const noexcept { return psd_by_construction_; }

 private:
  friend GramMatrix gram_matrix(std::shared_ptr<const Matrix> features, const KernelSpec& spec);

  Matrix entries_;
  KernelSpec spec_;
  std::shared_ptr<const Matrix> features_;
  bool psd_by_construction_ = false;
};

GramMatrix gram_matrix(std::shared_ptr<const Matrix> features, const KernelSpec& spec);
GramMatrix gram_matrix(const Matrix& features, const KernelSpec& spec);

/// Kernel values K(rows[r], cols[c]) as a rows.rows() x cols.rows() matrix.
Matrix cross_kernel(const Matrix& rows, const Matrix& cols, const KernelSpec& spec);

/// Feature-space distance ||phi(x_i) - phi(x_j)|| from kernel entries.
/// Round-off negatives down to -1e-12 are clamped; anything below throws DomainError.
double mapped_distance(double k_ii, double k_jj, double k_ij);

}  // namespace svrtune
