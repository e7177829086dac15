#include "sindyc/kernels.hpp"

#include <cstdlib>
#include <string>

#include "sindyc/errors.hpp"

namespace sindyc::kernels {

namespace detail {
const KernelTable* avx2_kernels_unchecked();
}

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_scalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

double squared_distance_scalar(const double* a, const double* b,
                               std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void multiply_scalar(const double* a, const double* b, double* out,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}

void centered_difference_scalar(const double* x, double inv_two_dt,
                                double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i + 2] - x[i]) * inv_two_dt;
}

constexpr KernelTable kScalar{
    "scalar",          dot_scalar,    sum_squares_scalar,
    squared_distance_scalar, axpy_scalar, multiply_scalar,
    scale_scalar,      centered_difference_scalar,
};

const KernelTable& select() {
  const char* env = std::getenv("SINDYC_KERNELS");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return kScalar;
  if (want == "avx2") {
    if (const auto* t = avx2_table()) return *t;
    return kScalar;
  }
  if (want == "neon") {
    if (const auto* t = neon_table()) return *t;
    return kScalar;
  }
  if (const auto* t = avx2_table()) return *t;
  if (const auto* t = neon_table()) return *t;
  return kScalar;
}

void require_same(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": length mismatch (" +
                     std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(__x86_64__) || defined(_M_X64)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? detail::avx2_kernels_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "dot");
  return active().dot(a.data(), b.data(), a.size());
}

double sum_squares(std::span<const double> a) {
  return active().sum_squares(a.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "squared_distance");
  return active().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size(), "axpy");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void multiply(std::span<const double> a, std::span<const double> b,
              std::span<double> out) {
  require_same(a.size(), b.size(), "multiply");
  require_same(a.size(), out.size(), "multiply");
  active().multiply(a.data(), b.data(), out.data(), a.size());
}

void scale(std::span<const double> a, double s, std::span<double> out) {
  require_same(a.size(), out.size(), "scale");
  active().scale(a.data(), s, out.data(), a.size());
}

}  // namespace sindyc::kernels
