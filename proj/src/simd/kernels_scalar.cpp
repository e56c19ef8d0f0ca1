#include <cmath>

#include "choicecheck/simd/kernels.hpp"

namespace choicecheck::simd {

namespace {

void row_dot(const double* x, std::size_t rows, std::size_t cols, const double* beta, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * beta[c];
    out[r] = acc;
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void syr_lower(double w, const double* v, std::size_t n, double* a) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = w * v[i];
    double* row = a + i * n;
    for (std::size_t j = 0; j <= i; ++j) row[j] += s * v[j];
  }
}

void gauss_accumulate(const double* grid, std::size_t m, double center, double inv_h, double* out) {
  for (std::size_t g = 0; g < m; ++g) {
    const double t = (grid[g] - center) * inv_h;
    out[g] += std::exp(-0.5 * t * t);
  }
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{Isa::kScalar, "scalar", &row_dot, &axpy, &syr_lower, &gauss_accumulate};
  return table;
}

}  // namespace choicecheck::simd
