#pragma once

// Data-parallel inner loops used across the toolkit.
//
// Each kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The variant is
// picked once at first use from CPUID; SINDYC_KERNELS=scalar|avx2|neon|auto
// overrides the choice. Elementwise kernels produce bit-identical results
// across variants; reductions may differ in the last bits because lanes are
// summed in a different order.

#include <cstddef>
#include <span>
#include <string_view>

namespace sindyc::kernels {

struct KernelTable {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i]^2
  double (*sum_squares)(const double* a, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = a[i] * b[i]; out may alias a or b
  void (*multiply)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = s * a[i]; out may alias a
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  // out[i] = (x[i + 2] - x[i]) * inv_two_dt for i in [0, n)
  void (*centered_difference)(const double* x, double inv_two_dt, double* out,
                              std::size_t n);
};

const KernelTable& scalar_table();

/// AVX2 table, or nullptr when the binary or the CPU lacks AVX2.
const KernelTable* avx2_table();

/// NEON table, or nullptr off aarch64.
const KernelTable* neon_table();

/// The table selected for this process.
const KernelTable& active();

// Span front-ends over the active table.

double dot(std::span<const double> a, std::span<const double> b);
double sum_squares(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void multiply(std::span<const double> a, std::span<const double> b,
              std::span<double> out);
void scale(std::span<const double> a, double s, std::span<double> out);

}  // namespace sindyc::kernels
