#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Data-parallel inner loops. Each ISA provides the same table of kernels; the
// scalar table is the reference implementation and the others are tested
// against it for equivalence (tests/test_kernels.cpp). Selection happens once,
// at first use, from CPU features and the CHOICE_CHECK_SIMD environment
// variable (scalar | avx2 | neon | auto).

namespace choicecheck::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  std::string_view name;

  // out[r] = sum_c x[r * cols + c] * beta[c] for a row-major rows x cols block.
  void (*row_dot)(const double* x, std::size_t rows, std::size_t cols, const double* beta, double* out);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // Lower triangle (including diagonal) of the row-major n x n matrix `a`
  // receives w * v * v^T. The strict upper triangle is left untouched.
  void (*syr_lower)(double w, const double* v, std::size_t n, double* a);

  // out[g] += exp(-0.5 * ((grid[g] - center) * inv_h)^2) for g in [0, m).
  void (*gauss_accumulate)(const double* grid, std::size_t m, double center, double inv_h, double* out);
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when the ISA was not compiled in or the running CPU lacks it.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available_kernels();

// The dispatched table used by the library.
const KernelTable& kernels() noexcept;

}  // namespace choicecheck::simd
