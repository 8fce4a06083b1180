// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "simd_tables.hpp"

namespace svrtune::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; k + 4 <= n; k += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
    acc0 = _mm256_fmadd_pd(d, d, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + k));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + k + 4));
  }
  for (; k + 4 <= n; k += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + k));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += a[k];
  return acc;
}

double centered_cross_avx2(const double* a, double mean_a, const double* b, double mean_b,
                           std::size_t n) {
  const __m256d ma = _mm256_set1_pd(mean_a);
  const __m256d mb = _mm256_set1_pd(mean_b);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    const __m256d a0 = _mm256_sub_pd(_mm256_loadu_pd(a + k), ma);
    const __m256d b0 = _mm256_sub_pd(_mm256_loadu_pd(b + k), mb);
    const __m256d a1 = _mm256_sub_pd(_mm256_loadu_pd(a + k + 4), ma);
    const __m256d b1 = _mm256_sub_pd(_mm256_loadu_pd(b + k + 4), mb);
    acc0 = _mm256_fmadd_pd(a0, b0, acc0);
    acc1 = _mm256_fmadd_pd(a1, b1, acc1);
  }
  for (; k + 4 <= n; k += 4) {
    const __m256d a0 = _mm256_sub_pd(_mm256_loadu_pd(a + k), ma);
    const __m256d b0 = _mm256_sub_pd(_mm256_loadu_pd(b + k), mb);
    acc0 = _mm256_fmadd_pd(a0, b0, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += (a[k] - mean_a) * (b[k] - mean_b);
  return acc;
}

void axpy2_avx2(double* y, double ca, const double* a, double cb, const double* b,
                std::size_t n) {
  const __m256d va = _mm256_set1_pd(ca);
  const __m256d vb = _mm256_set1_pd(cb);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d acc = _mm256_loadu_pd(y + k);
    acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(a + k), acc);
    acc = _mm256_fmadd_pd(vb, _mm256_loadu_pd(b + k), acc);
    _mm256_storeu_pd(y + k, acc);
  }
  for (; k < n; ++k) y[k] += ca * a[k] + cb * b[k];
}

}  // namespace

const KernelTable kAvx2Table{
    "avx2",    squared_distance_avx2, dot_avx2, sum_avx2, centered_cross_avx2,
    axpy2_avx2,
};

}  // namespace svrtune::simd::detail
