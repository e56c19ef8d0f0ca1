// AArch64 only; Advanced SIMD is mandatory there, so no runtime probe.
#include <arm_neon.h>

#include <cmath>

#include "choicecheck/simd/kernels.hpp"

namespace choicecheck::simd {

namespace {

void row_dot(const double* x, std::size_t rows, std::size_t cols, const double* beta, double* out) {
  const std::size_t vec_end = cols & ~std::size_t{1};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x + r * cols;
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t c = 0;
    for (; c < vec_end; c += 2) acc = vfmaq_f64(acc, vld1q_f64(row + c), vld1q_f64(beta + c));
    double s = vaddvq_f64(acc);
    for (; c < cols; ++c) s += row[c] * beta[c];
    out[r] = s;
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void syr_lower(double w, const double* v, std::size_t n, double* a) {
  for (std::size_t i = 0; i < n; ++i) axpy(w * v[i], v, a + i * n, i + 1);
}

// The exponent argument is vectorised; exp itself stays in libm per lane.
void gauss_accumulate(const double* grid, std::size_t m, double center, double inv_h, double* out) {
  const float64x2_t vc = vdupq_n_f64(center);
  const float64x2_t vh = vdupq_n_f64(inv_h);
  std::size_t g = 0;
  for (; g + 2 <= m; g += 2) {
    const float64x2_t t = vmulq_f64(vsubq_f64(vld1q_f64(grid + g), vc), vh);
    const float64x2_t q = vmulq_f64(vdupq_n_f64(-0.5), vmulq_f64(t, t));
    out[g] += std::exp(vgetq_lane_f64(q, 0));
    out[g + 1] += std::exp(vgetq_lane_f64(q, 1));
  }
  for (; g < m; ++g) {
    const double t = (grid[g] - center) * inv_h;
    out[g] += std::exp(-0.5 * t * t);
  }
}

}  // namespace

const KernelTable* neon_kernels() noexcept {
  static const KernelTable table{Isa::kNeon, "neon", &row_dot, &axpy, &syr_lower, &gauss_accumulate};
  return &table;
}

}  // namespace choicecheck::simd
