#include "svrtune/svr_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "svrtune/simd.hpp"

namespace svrtune {

SvrModel::SvrModel(std::vector<double> alpha, std::vector<double> alpha_star, double bias,
                   double C, double epsilon, double solver_tol, KernelSpec spec,
                   std::shared_ptr<const Matrix> training_features, std::vector<double> fitted)
    : alpha_(std::move(alpha)),
      alpha_star_(std::move(alpha_star)),
      bias_(bias),
      C_(C),
      epsilon_(epsilon),
      solver_tol_(solver_tol),
      spec_(std::move(spec)),
      features_(std::move(training_features)),
      fitted_(std::move(fitted)) {
  if (alpha_.size() != alpha_star_.size()) throw InputError("SvrModel: coefficient size mismatch");
  const double tau_sv = 1e-8 * C_;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    const double c = alpha_star_[i] - alpha_[i];
    if (std::abs(c) > tau_sv) {
      sv_indices_.push_back(i);
      sv_coef_.push_back(c);
    }
  }
}

double SvrModel::predict(std::span<const double> x) const {
  if (sv_indices_.empty()) return bias_;
  if (!features_) throw InputError("predict: model carries no training features");
  if (x.size() != features_->cols()) throw InputError("predict: dimension mismatch");
  thread_local std::vector<double> kvals;
  kvals.resize(sv_indices_.size());
  for (std::size_t s = 0; s < sv_indices_.size(); ++s) {
    kvals[s] = kernel_value(pair_g(features_->row(sv_indices_[s]), x, spec_), spec_.gamma);
  }
  return simd::dot(sv_coef_, kvals) + bias_;
}

std::vector<double> SvrModel::predict(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = predict(rows.row(r));
  return out;
}

std::vector<double> SvrModel::predict_from_kernel(const Matrix& kernel_rows) const {
  if (kernel_rows.cols() != alpha_.size()) {
    throw InputError("predict_from_kernel: kernel width does not match the training set");
  }
  std::vector<double> out(kernel_rows.rows());
  for (std::size_t r = 0; r < kernel_rows.rows(); ++r) {
    const auto k = kernel_rows.row(r);
    double acc = 0.0;
    for (std::size_t s = 0; s < sv_indices_.size(); ++s) acc += sv_coef_[s] * k[sv_indices_[s]];
    out[r] = acc + bias_;
  }
  return out;
}

CachedKernelRows::CachedKernelRows(std::shared_ptr<const Matrix> features, KernelSpec spec,
                                   std::size_t capacity)
    : features_(std::move(features)), spec_(std::move(spec)), capacity_(std::max<std::size_t>(capacity, 2)) {
  if (!features_) throw InputError("CachedKernelRows: null features");
  spec_.validate(features_->cols());
  const std::size_t n = features_->rows();
  where_.resize(n);
  storage_.resize(n);
  cached_.assign(n, false);
}

std::span<const double> CachedKernelRows::row(std::size_t i) {
  if (cached_[i]) {
    ++hits_;
    lru_.splice(lru_.begin(), lru_, where_[i]);
    return storage_[i];
  }
  ++misses_;
  std::vector<double> buf;
  if (lru_.size() >= capacity_) {
    const std::size_t victim = lru_.back();
    lru_.pop_back();
    cached_[victim] = false;
    buf = std::move(storage_[victim]);
    storage_[victim] = {};
  }
  const std::size_t n = features_->rows();
  buf.resize(n);
  const auto xi = features_->row(i);
  for (std::size_t j = 0; j < n; ++j) {
    buf[j] = j == i ? 1.0 : kernel_value(pair_g(xi, features_->row(j), spec_), spec_.gamma);
  }
  storage_[i] = std::move(buf);
  lru_.push_front(i);
  where_[i] = lru_.begin();
  cached_[i] = true;
  return storage_[i];
}

namespace {

void check_psd(const GramMatrix& gram) {
  const std::size_t n = gram.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (gram(i, i) < -1e-12) throw InputError("Gram matrix has a negative diagonal entry");
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(gram(i, j)) > std::sqrt(gram(i, i) * gram(j, j)) + 1e-10) {
        throw InputError("Gram matrix is not positive semidefinite (2x2 minor)");
      }
    }
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = gram(i, j);
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-8 * static_cast<double>(n)) {
    throw InputError("Gram matrix is not positive semidefinite");
  }
}

// SMO over the 2N variables z. For t < N, z_t = a*_t with label +1; for
// t >= N, z_t = a_{t-N} with label -1. Then a*_i - a_i = z_i - z_{i+N},
// Q_tu = s_t s_u K(p(t), p(u)) and the gradient is G_t = s_t h_p(t) + q_t with
// h = K (a* - a) and q the linear term.
class SmoSolver {
 public:
  SmoSolver(KernelRows& rows, std::span<const double> y, double C, double epsilon,
            const SolverOptions& opt)
      : rows_(rows), y_(y), n_(y.size()), C_(C), eps_(epsilon), opt_(opt) {
    z_.assign(2 * n_, 0.0);
    h_.assign(n_, 0.0);
    q_.resize(2 * n_);
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = rows_.diagonal(i);
    for (std::size_t i = 0; i < n_; ++i) {
      q_[i] = eps_ - y_[i];
      q_[i + n_] = eps_ + y_[i];
    }
    if (opt_.warm_start) start_from(*opt_.warm_start);
  }

  SolveDiagnostics run() {
    SolveDiagnostics diag;
    const std::size_t max_iter =
        opt_.max_iter != 0 ? opt_.max_iter : std::max<std::size_t>(10'000'000, 100 * n_);
    if (opt_.record_objective) diag.objective_history.push_back(objective());
    while (diag.iterations < max_iter) {
      std::size_t i = 0, j = 0;
      if (!select(i, j)) break;
      update(i, j);
      ++diag.iterations;
      if (opt_.record_objective) diag.objective_history.push_back(objective());
    }
    remove_overlap();
    diag.max_kkt_violation = violation();
    diag.converged = diag.max_kkt_violation <= opt_.tol;
    diag.dual_objective = objective();
    return diag;
  }

  std::vector<double> alpha() const {
    return {z_.begin() + static_cast<std::ptrdiff_t>(n_), z_.end()};
  }
  std::vector<double> alpha_star() const {
    return {z_.begin(), z_.begin() + static_cast<std::ptrdiff_t>(n_)};
  }
  const std::vector<double>& h() const { return h_; }

  // Average of the KKT-implied offsets over free variables, or the midpoint
  // of the feasible interval when none is free.
  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -ub;
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < 2 * n_; ++t) {
      const double s = label(t);
      const double yg = s * grad(t);
      if (at_upper(t)) {
        if (s < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (at_lower(t)) {
        if (s > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
    return -rho;
  }

 private:
  double label(std::size_t t) const { return t < n_ ? 1.0 : -1.0; }
  std::size_t point(std::size_t t) const { return t < n_ ? t : t - n_; }
  double grad(std::size_t t) const { return label(t) * h_[point(t)] + q_[t]; }
  bool at_upper(std::size_t t) const { return z_[t] >= C_; }
  bool at_lower(std::size_t t) const { return z_[t] <= 0.0; }

  double objective() const {
    double obj = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double beta = z_[i] - z_[i + n_];
      obj += 0.5 * beta * h_[i] + eps_ * (z_[i] + z_[i + n_]) - y_[i] * beta;
    }
    return obj;
  }

  double violation() const {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = gmax;
    for (std::size_t t = 0; t < 2 * n_; ++t) {
      const double s = label(t);
      const double g = grad(t);
      if (s > 0) {
        if (!at_upper(t)) gmax = std::max(gmax, -g);
        if (!at_lower(t)) gmax2 = std::max(gmax2, g);
      } else {
        if (!at_lower(t)) gmax = std::max(gmax, g);
        if (!at_upper(t)) gmax2 = std::max(gmax2, -g);
      }
    }
    return gmax + gmax2;
  }

  // Maximal violation picks i; j maximizes the second-order decrease among
  // the variables that violate jointly with i. Returns false at optimality.
  // Variable t < N has gradient h + q, t >= N has -h + q.
  bool select(std::size_t& out_i, std::size_t& out_j) {
    constexpr double kTau = 1e-12;
    const double* z = z_.data();
    const double* h = h_.data();
    const double* q = q_.data();
    const std::size_t n = n_;
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 2 * n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -(h[t] + q[t]);
      if (z[t] < C_ && v >= gmax) { gmax = v; best_i = t; }
    }
    for (std::size_t t = 0; t < n; ++t) {
      const double v = q[t + n] - h[t];
      if (z[t + n] > 0.0 && v >= gmax) { gmax = v; best_i = t + n; }
    }
    if (best_i == 2 * n) return false;

    const std::size_t pi = point(best_i);
    const double* ki = rows_.row(pi).data();
    const double* dg = diag_.data();
    const double kii = dg[pi];
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t best_j = 2 * n;
    auto consider = [&](std::size_t t, std::size_t pt, double g2) {
      gmax2 = std::max(gmax2, g2);
      const double grad_diff = gmax + g2;
      if (grad_diff <= 0.0) return;
      double quad = kii + dg[pt] - 2.0 * ki[pt];
      if (quad <= 0.0) quad = kTau;
      const double obj = -(grad_diff * grad_diff) / quad;
      if (obj <= best_obj) { best_obj = obj; best_j = t; }
    };
    for (std::size_t t = 0; t < n; ++t) {
      if (z[t] > 0.0) consider(t, t, h[t] + q[t]);
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (z[t + n] < C_) consider(t + n, t, h[t] - q[t + n]);
    }
    if (gmax + gmax2 < opt_.tol || best_j == 2 * n) return false;
    out_i = best_i;
    out_j = best_j;
    return true;
  }

  void update(std::size_t i, std::size_t j) {
    constexpr double kTau = 1e-12;
    const std::size_t pi = point(i), pj = point(j);
    const std::span<const double> ki = rows_.row(pi);
    const double kij = ki[pj];
    double quad = diag_[pi] + diag_[pj] - 2.0 * kij;
    if (pi == pj) quad = 0.0;
    if (quad <= 0.0) quad = kTau;
    const double gi = grad(i), gj = grad(j);
    const double old_i = z_[i], old_j = z_[j];
    double& ai = z_[i];
    double& aj = z_[j];

    if (label(i) != label(j)) {
      const double delta = (-gi - gj) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else if (ai < 0) {
        ai = 0; aj = -diff;
      }
      if (diff > 0) {
        if (ai > C_) { ai = C_; aj = C_ - diff; }
      } else if (aj > C_) {
        aj = C_; ai = C_ + diff;
      }
    } else {
      const double delta = (gi - gj) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C_) {
        if (ai > C_) { ai = C_; aj = sum - C_; }
      } else if (aj < 0) {
        aj = 0; ai = sum;
      }
      if (sum > C_) {
        if (aj > C_) { aj = C_; ai = sum - C_; }
      } else if (ai < 0) {
        ai = 0; aj = sum;
      }
    }

    const double dbi = label(i) * (ai - old_i);
    const double dbj = label(j) * (aj - old_j);
    if (dbi == 0.0 && dbj == 0.0) return;
    if (pi == pj) {
      simd::axpy2(h_, dbi, ki, dbj, ki);
    } else {
      // Row i may be evicted by fetching row j from a small cache, so copy it first.
      thread_local std::vector<double> row_i;
      row_i.assign(ki.begin(), ki.end());
      const std::span<const double> kj = rows_.row(pj);
      simd::axpy2(h_, dbi, row_i, dbj, kj);
    }
  }

  void start_from(const SvrModel& warm) {
    if (warm.size() != n_) throw InputError("solve_dual: warm start size mismatch");
    const double scale = C_ / warm.C();
    for (std::size_t i = 0; i < n_; ++i) {
      z_[i] = std::min(warm.alpha_star()[i] * scale, C_);
      z_[i + n_] = std::min(warm.alpha()[i] * scale, C_);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      const double beta = z_[i] - z_[i + n_];
      if (beta == 0.0) continue;
      const std::span<const double> ki = rows_.row(i);
      for (std::size_t u = 0; u < n_; ++u) h_[u] += beta * ki[u];
    }
  }

  // a_i and a*_i both positive only adds eps (a_i + a*_i) to the objective;
  // removing the overlap keeps a* - a and never increases the objective.
  void remove_overlap() {
    for (std::size_t i = 0; i < n_; ++i) {
      const double m = std::min(z_[i], z_[i + n_]);
      if (m > 0.0) {
        z_[i] -= m;
        z_[i + n_] -= m;
        if (z_[i] < 0.0) z_[i] = 0.0;
        if (z_[i + n_] < 0.0) z_[i + n_] = 0.0;
      }
    }
  }

  KernelRows& rows_;
  std::span<const double> y_;
  std::size_t n_;
  double C_, eps_;
  const SolverOptions& opt_;
  std::vector<double> z_, h_, q_, diag_;
};

void check_problem(std::size_t n_rows, std::span<const double> y, double C, double epsilon,
                   const SolverOptions& options) {
  if (y.size() != n_rows) throw InputError("solve_dual: target length does not match kernel size");
  if (n_rows == 0) throw InputError("solve_dual: empty training set");
  if (!(C > 0.0) || !std::isfinite(C)) throw InputError("solve_dual: C must be positive");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw InputError("solve_dual: epsilon must be nonnegative");
  }
  if (!(options.tol > 0.0)) throw InputError("solve_dual: tolerance must be positive");
  for (double v : y) {
    if (!std::isfinite(v)) throw InputError("solve_dual: non-finite target");
  }
}

SolveResult finish(SmoSolver& smo, SolveDiagnostics diag, double C, double epsilon,
                   const SolverOptions& options, KernelSpec spec,
                   std::shared_ptr<const Matrix> features) {
  const double b = smo.bias();
  std::vector<double> fitted = smo.h();
  for (double& f : fitted) f += b;
  SvrModel model(smo.alpha(), smo.alpha_star(), b, C, epsilon, options.tol, std::move(spec),
                 std::move(features), std::move(fitted));
  return {std::move(model), std::move(diag)};
}

}  // namespace

SolveResult solve_dual(const GramMatrix& gram, std::span<const double> y, double C,
                       double epsilon, const SolverOptions& options) {
  check_problem(gram.size(), y, C, epsilon, options);
  if (options.verify_psd && !gram.psd_by_construction()) check_psd(gram);
  DenseKernelRows rows(gram);
  SmoSolver smo(rows, y, C, epsilon, options);
  SolveDiagnostics diag = smo.run();
  return finish(smo, std::move(diag), C, epsilon, options, gram.spec(), gram.features());
}

SolveResult solve_dual(std::shared_ptr<const Matrix> features, const KernelSpec& spec,
                       std::span<const double> y, double C, double epsilon,
                       std::size_t cache_rows, const SolverOptions& options) {
  if (!features) throw InputError("solve_dual: null features");
  check_problem(features->rows(), y, C, epsilon, options);
  CachedKernelRows rows(features, spec, cache_rows);
  SmoSolver smo(rows, y, C, epsilon, options);
  SolveDiagnostics diag = smo.run();
  return finish(smo, std::move(diag), C, epsilon, options, spec, std::move(features));
}

VectorSets classify_vectors(const SvrModel& model, std::span<const double> y,
                            std::span<const double> predictions, double tau_alpha,
                            double tau_eps) {
  const std::size_t n = model.size();
  if (y.size() != n || predictions.size() != n) {
    throw InputError("classify_vectors: length mismatch");
  }
  const double C = model.C();
  const double eps = model.epsilon();
  if (tau_eps < 0.0) tau_eps = default_tau_eps(eps);
  const double slack = tau_eps + model.solver_tol();
  VectorSets sets;
  for (std::size_t i = 0; i < n; ++i) {
    const double coef = std::max(model.alpha()[i], model.alpha_star()[i]);
    const double residual = std::abs(y[i] - predictions[i]);
    if (coef >= C * (1.0 - tau_alpha)) {
      if (residual > eps - slack) sets.bounded.push_back(i);
    } else if (coef > tau_alpha * C) {
      sets.margin.push_back(i);
      if (std::abs(residual - eps) > slack) ++sets.residual_mismatches;
    }
  }
  return sets;
}

}  // namespace svrtune
