// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>

#include "choicecheck/simd/kernels.hpp"

namespace choicecheck::simd {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) for x <= 0. Range reduction x = n ln2 + r with |r| <= ln2/2, then a
// degree-13 Taylor polynomial (truncation error < 2e-16 relative). Inputs
// below -708 flush to zero.
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d floor_arg = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, floor_arg, _CMP_LT_OQ);
  x = _mm256_max_pd(x, floor_arg);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

  static constexpr double kInvFact[] = {1.0,
                                        1.0,
                                        1.0 / 2,
                                        1.0 / 6,
                                        1.0 / 24,
                                        1.0 / 120,
                                        1.0 / 720,
                                        1.0 / 5040,
                                        1.0 / 40320,
                                        1.0 / 362880,
                                        1.0 / 3628800,
                                        1.0 / 39916800,
                                        1.0 / 479001600,
                                        1.0 / 6227020800.0};
  __m256d p = _mm256_set1_pd(kInvFact[13]);
  for (int k = 12; k >= 0; --k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[k]));

  __m256i e = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  e = _mm256_slli_epi64(_mm256_add_epi64(e, _mm256_set1_epi64x(1023)), 52);
  const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(e));
  return _mm256_andnot_pd(underflow, result);
}

void row_dot(const double* x, std::size_t rows, std::size_t cols, const double* beta, double* out) {
  const std::size_t vec_end = cols & ~std::size_t{3};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x + r * cols;
    __m256d acc = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c < vec_end; c += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(beta + c), acc);
    double s = hsum(acc);
    for (; c < cols; ++c) s += row[c] * beta[c];
    out[r] = s;
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void syr_lower(double w, const double* v, std::size_t n, double* a) {
  for (std::size_t i = 0; i < n; ++i) axpy(w * v[i], v, a + i * n, i + 1);
}

void gauss_accumulate(const double* grid, std::size_t m, double center, double inv_h, double* out) {
  const __m256d vc = _mm256_set1_pd(center);
  const __m256d vh = _mm256_set1_pd(inv_h);
  const __m256d neg_half = _mm256_set1_pd(-0.5);
  std::size_t g = 0;
  for (; g + 4 <= m; g += 4) {
    const __m256d t = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(grid + g), vc), vh);
    const __m256d k = exp_nonpositive(_mm256_mul_pd(neg_half, _mm256_mul_pd(t, t)));
    _mm256_storeu_pd(out + g, _mm256_add_pd(_mm256_loadu_pd(out + g), k));
  }
  for (; g < m; ++g) {
    const double t = (grid[g] - center) * inv_h;
    out[g] += std::exp(-0.5 * t * t);
  }
}

}  // namespace

const KernelTable* avx2_kernels() noexcept {
  static const KernelTable table{Isa::kAvx2, "avx2", &row_dot, &axpy, &syr_lower, &gauss_accumulate};
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

}  // namespace choicecheck::simd
