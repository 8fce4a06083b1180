#include "svrtune/kernels.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "svrtune/simd.hpp"

namespace svrtune {

std::string_view to_string(KernelFamily family) noexcept {
  return family == KernelFamily::RBF ? "rbf" : "mahalanobis";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "rbf") return KernelFamily::RBF;
  if (name == "mahalanobis") return KernelFamily::Mahalanobis;
  throw InputError("unknown kernel family '" + std::string(name) + "'");
}

void KernelSpec::validate(std::size_t dim) const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InputError("kernel gamma must be positive and finite");
  }
  if (family == KernelFamily::Mahalanobis) {
    if (!mstats) throw InputError("Mahalanobis kernel requires covariance statistics");
    if (mstats->dim() != dim) throw InputError("Mahalanobis statistics dimension mismatch");
  }
}

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("squared_euclidean: dimension mismatch");
  return simd::squared_distance(a, b);
}

MahalanobisStats mahalanobis_statistics(const Matrix& features, double ridge_scale) {
  const std::size_t n_rows = features.rows();
  const std::size_t dim = features.cols();
  if (n_rows < 2) throw InputError("mahalanobis_statistics needs at least two rows");
  if (dim == 0) throw InputError("mahalanobis_statistics needs at least one feature");
  if (ridge_scale < 0.0) throw InputError("ridge_scale must be nonnegative");

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> x(features.data().data(), static_cast<Eigen::Index>(n_rows),
                                     static_cast<Eigen::Index>(dim));
  const double inv_n = 1.0 / static_cast<double>(n_rows);

  const Eigen::RowVectorXd center = x.colwise().sum() * inv_n;
  const RowMajor centered = x.rowwise() - center;
  Eigen::MatrixXd q = (centered.transpose() * centered) * inv_n;
  q = 0.5 * (q + q.transpose());

  MahalanobisStats stats;
  stats.center.assign(center.data(), center.data() + dim);
  stats.degenerate = centered.cwiseAbs().maxCoeff() == 0.0;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q, Eigen::EigenvaluesOnly);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  const double lambda_min = eig.eigenvalues().minCoeff();
  const bool singular = lambda_max <= 0.0 || lambda_min <= 1e-12 * lambda_max;
  if (singular) {
    const double trace = q.trace();
    stats.ridge = ridge_scale * (trace > 0.0 ? trace / static_cast<double>(dim) : 1.0);
    if (stats.ridge == 0.0) {
      throw DegenerateError("covariance is singular and ridge_scale is zero");
    }
  }

  const Eigen::MatrixXd regularized =
      q + stats.ridge * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                                  static_cast<Eigen::Index>(dim));
  const Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  if (llt.info() != Eigen::Success) {
    throw DegenerateError("regularized covariance is not positive definite");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                                            static_cast<Eigen::Index>(dim)));
  inv = 0.5 * (inv + inv.transpose());

  stats.covariance = Matrix(dim, dim);
  stats.inverse = Matrix(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      stats.covariance(r, c) = q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      stats.inverse(r, c) = inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }

  double m = 0.0;
  for (Eigen::Index k = 0; k < centered.rows(); ++k) {
    m += centered.row(k) * inv * centered.row(k).transpose();
  }
  stats.m = stats.degenerate ? 0.0 : m * inv_n;
  return stats;
}

double mahalanobis_g(std::span<const double> a, std::span<const double> b,
                     const MahalanobisStats& stats) {
  const std::size_t dim = stats.dim();
  if (a.size() != dim || b.size() != dim) throw InputError("mahalanobis_g: dimension mismatch");
  if (!(stats.m > 0.0)) throw DegenerateError("mahalanobis_g: statistics have m = 0");

  // Small fixed-size scratch for the difference; feature counts are tiny.
  double stack_buf[32];
  std::vector<double> heap_buf;
  double* diff = stack_buf;
  if (dim > 32) {
    heap_buf.resize(dim);
    diff = heap_buf.data();
  }
  for (std::size_t k = 0; k < dim; ++k) diff[k] = a[k] - b[k];

  const std::span<const double> d(diff, dim);
  double form = 0.0;
  for (std::size_t r = 0; r < dim; ++r) form += d[r] * simd::dot(stats.inverse.row(r), d);
  return std::max(form, 0.0) / stats.m;
}

double pair_g(std::span<const double> a, std::span<const double> b, const KernelSpec& spec) {
  if (spec.family == KernelFamily::RBF) return squared_euclidean(a, b);
  if (!spec.mstats) throw InputError("Mahalanobis kernel requires covariance statistics");
  return mahalanobis_g(a, b, *spec.mstats);
}

GramMatrix::GramMatrix(Matrix entries, KernelSpec spec)
    : entries_(std::move(entries)), spec_(std::move(spec)) {
  if (entries_.rows() != entries_.cols()) throw InputError("Gram matrix must be square");
  for (std::size_t i = 0; i < entries_.rows(); ++i) {
    for (std::size_t j = i + 1; j < entries_.cols(); ++j) {
      if (std::abs(entries_(i, j) - entries_(j, i)) > 1e-12) {
        throw InputError("Gram matrix is not symmetric");
      }
    }
  }
}

GramMatrix gram_matrix(std::shared_ptr<const Matrix> features, const KernelSpec& spec) {
  if (!features) throw InputError("gram_matrix: null features");
  spec.validate(features->cols());
  const std::size_t n = features->rows();

  GramMatrix gram;
  gram.entries_ = Matrix(n, n);
  gram.spec_ = spec;
  gram.psd_by_construction_ = true;
  for (std::size_t i = 0; i < n; ++i) {
    gram.entries_(i, i) = 1.0;
    const auto xi = features->row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = kernel_value(pair_g(xi, features->row(j), spec), spec.gamma);
      gram.entries_(i, j) = k;
      gram.entries_(j, i) = k;
    }
  }
  gram.features_ = std::move(features);
  return gram;
}

GramMatrix gram_matrix(const Matrix& features, const KernelSpec& spec) {
  return gram_matrix(std::make_shared<const Matrix>(features), spec);
}

Matrix cross_kernel(const Matrix& rows, const Matrix& cols, const KernelSpec& spec) {
  if (rows.cols() != cols.cols()) throw InputError("cross_kernel: dimension mismatch");
  spec.validate(rows.cols());
  Matrix out(rows.rows(), cols.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < cols.rows(); ++c) {
      out(r, c) = kernel_value(pair_g(rows.row(r), cols.row(c), spec), spec.gamma);
    }
  }
  return out;
}

double mapped_distance(double k_ii, double k_jj, double k_ij) {
  const double sq = k_ii + k_jj - 2.0 * k_ij;
  if (sq < -1e-12) {
    throw DomainError("mapped_distance: kernel entries imply a negative squared distance");
  }
  return std::sqrt(std::max(sq, 0.0));
}

}  // namespace svrtune
