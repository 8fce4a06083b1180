#pragma once

// Data-parallel inner loops used by the kernel, deviation and solver code.
//
// Every kernel exists as a portable scalar reference and, on x86-64, as an
// AVX2/FMA variant. The active table is chosen once at first use from the
// CPU's capabilities; setting SVRTUNE_SIMD=scalar in the environment forces
// the reference path. Variants agree to rounding, not bit-for-bit (lane-wise
// accumulation and fused multiply-add change the summation order), so a single
// process always uses one table for everything.

#include <cstddef>
#include <span>
#include <string_view>

namespace svrtune::simd {

struct KernelTable {
  std::string_view name;
  // sum_k (a[k] - b[k])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_k a[k]
  double (*sum)(const double* a, std::size_t n);
  // sum_k (a[k] - mean_a) * (b[k] - mean_b)
  double (*centered_cross)(const double* a, double mean_a, const double* b, double mean_b,
                           std::size_t n);
  // y[k] += ca * a[k] + cb * b[k]
  void (*axpy2)(double* y, double ca, const double* a, double cb, const double* b,
                std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// The AVX2 table, or nullptr when it was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table() noexcept;

/// Table used by the library.
const KernelTable& active() noexcept;

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }
inline double centered_cross(std::span<const double> a, double mean_a, std::span<const double> b,
                             double mean_b) {
  return active().centered_cross(a.data(), mean_a, b.data(), mean_b, a.size());
}
inline void axpy2(std::span<double> y, double ca, std::span<const double> a, double cb,
                  std::span<const double> b) {
  active().axpy2(y.data(), ca, a.data(), cb, b.data(), y.size());
}

}  // namespace svrtune::simd
