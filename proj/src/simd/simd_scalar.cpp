#include "simd_tables.hpp"

namespace svrtune::simd::detail {
namespace {

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k];
  return acc;
}

double centered_cross_scalar(const double* a, double mean_a, const double* b, double mean_b,
                             std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += (a[k] - mean_a) * (b[k] - mean_b);
  return acc;
}

void axpy2_scalar(double* y, double ca, const double* a, double cb, const double* b,
                  std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += ca * a[k] + cb * b[k];
}

}  // namespace

const KernelTable kScalarTable{
    "scalar",      squared_distance_scalar, dot_scalar, sum_scalar, centered_cross_scalar,
    axpy2_scalar,
};

}  // namespace svrtune::simd::detail
