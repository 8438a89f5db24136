#include "u1/simd/kernels.hpp"

namespace u1::simd {
namespace {

double squared_l2_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double sum_squares_f32_scalar(const float* a, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = a[i];
    sum += v * v;
  }
  return sum;
}

void squared_l2_rows_scalar(const double* q, const double* rows, std::size_t count,
                            std::size_t n, double* out) {
  for (std::size_t r = 0; r < count; ++r) out[r] = squared_l2_scalar(q, rows + r * n, n);
}

constexpr KernelTable kScalar{squared_l2_scalar, dot_scalar, sum_squares_f32_scalar,
                              squared_l2_rows_scalar};

}  // namespace

const KernelTable* detail::scalar_table() { return &kScalar; }

}  // namespace u1::simd
