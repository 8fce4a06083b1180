#include "svrtune/deviation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "svrtune/simd.hpp"

namespace svrtune {

PairwiseG pairwise_g_values(const Matrix& features, KernelFamily family,
                            const MahalanobisStats* stats) {
  const std::size_t n = features.rows();
  if (n < 2) throw InputError("pairwise_g_values needs at least two points");
  if (family == KernelFamily::Mahalanobis && stats == nullptr) {
    throw InputError("pairwise_g_values: Mahalanobis family requires statistics");
  }
  PairwiseG pg;
  pg.n_points = n;
  pg.values.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pg.values.push_back(family == KernelFamily::RBF
                              ? squared_euclidean(features.row(i), features.row(j))
                              : mahalanobis_g(features.row(i), features.row(j), *stats));
    }
  }
  std::sort(pg.values.begin(), pg.values.end());
  return pg;
}

PairwiseG pairwise_g_values(const Matrix& features, const KernelSpec& spec) {
  return pairwise_g_values(features, spec.family, spec.mstats.get());
}

namespace {

void check_pairs(const PairwiseG& pg) {
  if (pg.n_points < 2 || pg.values.size() != pg.n_points * (pg.n_points - 1) / 2) {
    throw InputError("PairwiseG is malformed");
  }
}

// Per-pair terms l, d and d', G = 0 pairs contribute zeros.
struct PairTerms {
  std::vector<double> l, d, dd;
};

void fill_terms(double gamma, const PairwiseG& pg, bool need_d, bool need_dd, PairTerms& t) {
  const std::size_t m = pg.values.size();
  t.l.resize(m);
  if (need_d) t.d.resize(m);
  if (need_dd) t.dd.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double g = pg.values[k];
    if (g == 0.0) {
      t.l[k] = 0.0;
      if (need_d) t.d[k] = 0.0;
      if (need_dd) t.dd[k] = 0.0;
      continue;
    }
    const double e = std::exp(-gamma * g);
    const double one_minus = -std::expm1(-gamma * g);  // 1 - e without cancellation
    const double l = std::sqrt(2.0 * one_minus);
    t.l[k] = l;
    if (!need_d) continue;
    const double d = l > 0.0 ? g * e / l : 0.0;
    t.d[k] = d;
    if (need_dd) t.dd[k] = l > 0.0 ? -g * d * (1.0 + e / (2.0 * one_minus)) : 0.0;
  }
}

PairTerms& scratch() {
  thread_local PairTerms terms;
  return terms;
}

double mean_of(const std::vector<double>& v) {
  return simd::sum(v) / static_cast<double>(v.size());
}

void check_gamma(double gamma, bool derivative) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw DomainError("deviation: gamma must be positive and finite");
  }
  if (derivative && gamma < kGammaFloor) {
    throw DomainError("deviation: derivative requested below the gamma floor");
  }
}

}  // namespace

double deviation_L(double gamma, const PairwiseG& pg) {
  check_pairs(pg);
  check_gamma(gamma, false);
  PairTerms& t = scratch();
  fill_terms(gamma, pg, false, false, t);
  const double mu = mean_of(t.l);
  return simd::centered_cross(t.l, mu, t.l, mu) / static_cast<double>(t.l.size());
}

DeviationValues deviation_all(double gamma, const PairwiseG& pg) {
  check_pairs(pg);
  check_gamma(gamma, true);
  PairTerms& t = scratch();
  fill_terms(gamma, pg, true, true, t);
  const double inv_m = 1.0 / static_cast<double>(t.l.size());
  const double mu_l = mean_of(t.l);
  const double mu_d = mean_of(t.d);
  const double mu_dd = mean_of(t.dd);
  DeviationValues out;
  out.value = simd::centered_cross(t.l, mu_l, t.l, mu_l) * inv_m;
  out.first = 2.0 * simd::centered_cross(t.l, mu_l, t.d, mu_d) * inv_m;
  out.second = 2.0 * (simd::centered_cross(t.d, mu_d, t.d, mu_d) +
                      simd::centered_cross(t.l, mu_l, t.dd, mu_dd)) *
               inv_m;
  return out;
}

double deviation_L_prime(double gamma, const PairwiseG& pg) {
  check_pairs(pg);
  check_gamma(gamma, true);
  PairTerms& t = scratch();
  fill_terms(gamma, pg, true, false, t);
  const double mu_l = mean_of(t.l);
  const double mu_d = mean_of(t.d);
  return 2.0 * simd::centered_cross(t.l, mu_l, t.d, mu_d) / static_cast<double>(t.l.size());
}

double deviation_L_second(double gamma, const PairwiseG& pg) {
  return deviation_all(gamma, pg).second;
}

namespace {

struct NewtonResult {
  double gamma;
  DeviationValues at;
  std::size_t iterations;
  bool converged;
};

// Safeguarded Newton on L' over [lo, hi] with L'(lo) > 0 >= L'(hi).
NewtonResult newton_in_bracket(const PairwiseG& pg, double lo, double hi, double abs_tol,
                               std::size_t max_iter) {
  double x = std::sqrt(lo * hi);
  DeviationValues v = deviation_all(x, pg);
  std::size_t iter = 0;
  bool converged = std::abs(v.first) <= abs_tol;
  // Once |L'| is within tolerance a few more Newton steps are taken so the
  // root is located to near machine precision.
  std::size_t polish = 0;
  while (iter < max_iter) {
    if (v.first > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    double next;
    bool newton_ok = v.second < 0.0;
    if (newton_ok) {
      next = x - v.first / v.second;
      newton_ok = next > lo && next < hi && std::isfinite(next);
    }
    if (!newton_ok) {
      if (converged) break;
      next = 0.5 * (lo + hi);
    }
    ++iter;
    const double step = std::abs(next - x);
    x = next;
    v = deviation_all(x, pg);
    if (std::abs(v.first) <= abs_tol) {
      converged = true;
      if (step <= 1e-15 * x || ++polish > 3) break;
    }
    if (hi - lo <= 1e-15 * hi) break;
  }
  converged = converged || std::abs(v.first) <= abs_tol;
  return {x, v, iter, converged};
}

}  // namespace

GammaSelection find_gamma_opt(const PairwiseG& pg, const GammaSearchOptions& options) {
  check_pairs(pg);
  if (pg.values.front() == pg.values.back()) {
    throw DegenerateError("find_gamma_opt: all pairwise distances are equal, L is identically 0");
  }
  if (!(options.tol > 0.0) || options.scan_points < 2 || !(options.scan_lo > 0.0) ||
      !(options.scan_hi > options.scan_lo)) {
    throw InputError("find_gamma_opt: invalid options");
  }

  const std::size_t n_scan = options.scan_points;
  const double log_lo = std::log(options.scan_lo);
  const double log_step = (std::log(options.scan_hi) - log_lo) / static_cast<double>(n_scan - 1);
  std::vector<double> grid(n_scan), slope(n_scan);
  double scale = 0.0;
  for (std::size_t k = 0; k < n_scan; ++k) {
    grid[k] = std::exp(log_lo + log_step * static_cast<double>(k));
    slope[k] = deviation_L_prime(grid[k], pg);
    scale = std::max(scale, std::abs(slope[k]));
  }

  const double abs_tol = options.tol * scale;
  std::optional<GammaSelection> best;
  for (std::size_t k = 0; k + 1 < n_scan; ++k) {
    if (!(slope[k] > 0.0 && slope[k + 1] <= 0.0)) continue;
    const NewtonResult r = newton_in_bracket(pg, grid[k], grid[k + 1], abs_tol, options.max_iter);
    if (best && r.at.value <= best->L_at_opt) continue;
    GammaSelection sel;
    sel.gamma_opt = r.gamma;
    sel.L_at_opt = r.at.value;
    sel.L_prime_at_opt = r.at.first;
    sel.L_second_at_opt = r.at.second;
    sel.derivative_scale = scale;
    sel.newton_iterations = r.iterations;
    sel.bracket_lo = grid[k];
    sel.bracket_hi = grid[k + 1];
    sel.converged = r.converged && r.at.second < 0.0;
    best = sel;
  }
  if (!best) {
    std::ostringstream msg;
    msg << "find_gamma_opt: no maximum of L in [" << options.scan_lo << ", " << options.scan_hi
        << "]; L'(lo) = " << slope.front() << ", L'(hi) = " << slope.back();
    throw RangeError(msg.str());
  }

  best->gamma_h = find_gamma_h(pg, options.kappa);
  if (!(best->gamma_opt < best->gamma_h)) {
    std::ostringstream msg;
    msg << "find_gamma_opt: gamma_opt = " << best->gamma_opt << " is not below gamma_h = "
        << best->gamma_h;
    throw RangeError(msg.str());
  }
  return *best;
}

double find_gamma_h(const PairwiseG& pg, double kappa) {
  check_pairs(pg);
  if (!(kappa > 0.0 && kappa < 1.0)) throw InputError("find_gamma_h: kappa must lie in (0, 1)");
  const auto it = std::upper_bound(pg.values.begin(), pg.values.end(), 0.0);
  if (it == pg.values.end()) throw DegenerateError("find_gamma_h: no positive pairwise distance");
  return std::log(1.0 / kappa) / *it;
}

std::vector<CurvePoint> sample_deviation_curve(const PairwiseG& pg, double lo, double hi,
                                               std::size_t count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) throw InputError("sample_deviation_curve: bad range");
  std::vector<CurvePoint> out(count);
  const double log_lo = std::log(lo);
  const double step = (std::log(hi) - log_lo) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) {
    const double g = std::exp(log_lo + step * static_cast<double>(k));
    const DeviationValues v = deviation_all(std::max(g, kGammaFloor), pg);
    out[k] = {g, v.value, v.first};
  }
  return out;
}

}  // namespace svrtune
