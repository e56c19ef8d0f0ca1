#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "choicecheck/simd/kernels.hpp"

using namespace choicecheck::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& g, std::size_t n) {
  std::normal_distribution<double> d(0.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol * (1.0 + std::abs(a)); }

}  // namespace

TEST_CASE("scalar kernels are listed first and the dispatched table is available") {
  const auto tables = available_kernels();
  REQUIRE(!tables.empty());
  CHECK(tables.front()->isa == Isa::kScalar);
  bool found = false;
  for (const auto* t : tables) found = found || t == &kernels();
  CHECK(found);
}

TEST_CASE("every kernel table matches the scalar reference") {
  const KernelTable& ref = scalar_kernels();
  std::mt19937_64 g(11);
  for (const auto* t : available_kernels()) {
    CAPTURE(t->name);
    // Odd sizes exercise the vector tails.
    for (std::size_t cols : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 13u, 21u}) {
      const std::size_t rows = 9;
      const auto x = random_vec(g, rows * cols);
      const auto beta = random_vec(g, cols);
      std::vector<double> a(rows), b(rows);
      ref.row_dot(x.data(), rows, cols, beta.data(), a.data());
      t->row_dot(x.data(), rows, cols, beta.data(), b.data());
      for (std::size_t r = 0; r < rows; ++r) CHECK(close(a[r], b[r]));

      auto y1 = random_vec(g, cols);
      auto y2 = y1;
      const auto v = random_vec(g, cols);
      ref.axpy(0.7, v.data(), y1.data(), cols);
      t->axpy(0.7, v.data(), y2.data(), cols);
      for (std::size_t i = 0; i < cols; ++i) CHECK(close(y1[i], y2[i]));

      std::vector<double> m1(cols * cols, 3.0), m2(cols * cols, 3.0);
      ref.syr_lower(0.3, v.data(), cols, m1.data());
      t->syr_lower(0.3, v.data(), cols, m2.data());
      for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          CHECK(close(m1[i * cols + j], m2[i * cols + j]));
          if (j > i) CHECK(m2[i * cols + j] == 3.0);
        }
      }
    }
    for (std::size_t m : {1u, 3u, 4u, 17u, 256u}) {
      std::vector<double> grid(m);
      for (std::size_t i = 0; i < m; ++i) grid[i] = -4.0 + 8.0 * static_cast<double>(i) / static_cast<double>(m);
      std::vector<double> a(m, 0.0), b(m, 0.0);
      ref.gauss_accumulate(grid.data(), m, 0.4, 1.7, a.data());
      t->gauss_accumulate(grid.data(), m, 0.4, 1.7, b.data());
      for (std::size_t i = 0; i < m; ++i) CHECK(close(a[i], b[i], 1e-13));
    }
  }
}

TEST_CASE("scalar kernels compute the documented quantities") {
  const KernelTable& k = scalar_kernels();
  const double x[6] = {1, 2, 3, 4, 5, 6};
  const double beta[3] = {1, 0, -1};
  double out[2];
  k.row_dot(x, 2, 3, beta, out);
  CHECK(out[0] == -2.0);
  CHECK(out[1] == -2.0);
  double a[4] = {0, 9, 0, 0};
  const double v[2] = {1, 2};
  k.syr_lower(2.0, v, 2, a);
  CHECK(a[0] == 2.0);
  CHECK(a[1] == 9.0);
  CHECK(a[2] == 4.0);
  CHECK(a[3] == 8.0);
  double grid[1] = {1.0};
  double g[1] = {0.0};
  k.gauss_accumulate(grid, 1, 0.0, 1.0, g);
  CHECK(g[0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}
