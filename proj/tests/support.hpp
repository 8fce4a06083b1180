#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "svrtune/matrix.hpp"

namespace svrtest {

inline svrtune::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                     double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  svrtune::Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = 0.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

/// Min-max scales every column of `m` to [0, 1] in place.
inline void scale_columns(svrtune::Matrix& m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double lo = m(0, j), hi = m(0, j);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      lo = std::min(lo, m(i, j));
      hi = std::max(hi, m(i, j));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
      m(i, j) = hi > lo ? (m(i, j) - lo) / (hi - lo) : 0.0;
    }
  }
}

inline double relative_error(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

/// Five-point central difference of f at x with step h.
template <typename F>
double central_difference(F&& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

/// Reference solution of the SVR dual in beta = a* - a:
///   min 1/2 b^T K b - y^T b + eps |b|_1  s.t.  sum b = 0, -C <= b <= C
/// by accelerated proximal gradient with restarts, in long double. The prox
/// step is solved exactly up to bisection on the multiplier of the sum
/// constraint.
struct QpReference {
  std::vector<long double> beta;
  long double objective = 0;
  long double stationarity = 0;  // max |b - prox(b - t grad)|
  std::size_t iterations = 0;
};

namespace detail {

inline void prox(std::span<const long double> v, long double t, long double eps, long double C,
                 std::span<long double> out) {
  auto place = [&](long double lambda) {
    long double total = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      long double w = v[i] - lambda;
      const long double shrink = t * eps;
      w = w > shrink ? w - shrink : (w < -shrink ? w + shrink : 0.0L);
      w = std::clamp(w, -C, C);
      out[i] = w;
      total += w;
    }
    return total;
  };
  long double lo = -C - t * eps, hi = C + t * eps;
  for (long double x : v) {
    lo = std::min(lo, x - C - t * eps - 1);
    hi = std::max(hi, x + C + t * eps + 1);
  }
  for (int it = 0; it < 200 && hi - lo > 0; ++it) {
    const long double mid = 0.5L * (lo + hi);
    if (place(mid) > 0) lo = mid; else hi = mid;
  }
  place(0.5L * (lo + hi));
}

}  // namespace detail

inline QpReference reference_qp(const svrtune::Matrix& K, std::span<const double> y, double C,
                                double eps, long double target = 1e-13L,
                                std::size_t max_iter = 2'000'000) {
  const std::size_t n = y.size();
  long double lip = 0;
  for (std::size_t i = 0; i < n; ++i) {
    long double row = 0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(static_cast<long double>(K(i, j)));
    lip = std::max(lip, row);
  }
  const long double t = 1.0L / std::max(lip, 1e-12L);
  const long double Cl = C, el = eps;

  auto gradient = [&](std::span<const long double> b, std::span<long double> g) {
    for (std::size_t i = 0; i < n; ++i) {
      long double s = -static_cast<long double>(y[i]);
      for (std::size_t j = 0; j < n; ++j) s += static_cast<long double>(K(i, j)) * b[j];
      g[i] = s;
    }
  };
  auto objective = [&](std::span<const long double> b) {
    long double obj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      long double kb = 0;
      for (std::size_t j = 0; j < n; ++j) kb += static_cast<long double>(K(i, j)) * b[j];
      obj += 0.5L * b[i] * kb - static_cast<long double>(y[i]) * b[i] + el * std::abs(b[i]);
    }
    return obj;
  };

  std::vector<long double> x(n, 0), x_prev(n, 0), z(n, 0), g(n), v(n), next(n);
  long double momentum = 1;
  QpReference ref;
  long double f_prev = objective(x);
  for (std::size_t it = 0; it < max_iter; ++it) {
    gradient(z, g);
    for (std::size_t i = 0; i < n; ++i) v[i] = z[i] - t * g[i];
    detail::prox(v, t, el, Cl, next);
    const long double f_next = objective(next);
    if (f_next > f_prev && momentum > 1) {
      // Restart the momentum when the objective goes up.
      momentum = 1;
      z = x;
      continue;
    }
    x_prev = x;
    x = next;
    f_prev = f_next;
    const long double m_next = 0.5L * (1 + std::sqrt(1 + 4 * momentum * momentum));
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + (momentum - 1) / m_next * (x[i] - x_prev[i]);
    momentum = m_next;
    ref.iterations = it + 1;

    if (it % 64 == 0) {
      gradient(x, g);
      for (std::size_t i = 0; i < n; ++i) v[i] = x[i] - t * g[i];
      detail::prox(v, t, el, Cl, next);
      long double res = 0;
      for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(next[i] - x[i]));
      ref.stationarity = res;
      if (res <= target) break;
    }
  }
  ref.beta = x;
  ref.objective = objective(x);
  return ref;
}

}  // namespace svrtest
