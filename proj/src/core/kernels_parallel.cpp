#include <algorithm>
#include <cstddef>

#include "edgeguard/error.hpp"
#include "edgeguard/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace edgeguard::kernels {
namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;
// Output rows per task in matmul_tn; keeps a block of C resident in L1.
constexpr std::size_t kTnBlock = 16;

void prepare_output(Tensor2& c, std::size_t rows, std::size_t cols, bool accumulate,
                    const char* what) {
  if (accumulate) {
    if (c.rows() != rows || c.cols() != cols) {
      throw DimensionError(std::string(what) + ": accumulator is " + c.shape_string() +
                           ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  } else if (c.rows() != rows || c.cols() != cols) {
    c = Tensor2(rows, cols);
  } else {
    c.fill(0.0);
  }
}

// One output row of A·B. Zero entries of A (frequent after ReLU) are skipped.
inline void matmul_row(const double* a_row, const double* b, double* c_row, std::size_t inner,
                       std::size_t n) {
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = a_row[k];
    if (aik == 0.0) continue;
    const double* b_row = b + k * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += aik * b_row[j];
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " · " + b.shape_string());
  }
  const std::size_t m = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  prepare_output(c, m, n, accumulate, "matmul");
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * inner * n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    matmul_row(pa + i * inner, pb, pc + i * n, inner, n);
  }
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: " + a.shape_string() + "ᵀ · " + b.shape_string());
  }
  const std::size_t inner = a.rows();
  const std::size_t m = a.cols();
  const std::size_t n = b.cols();
  prepare_output(c, m, n, accumulate, "matmul_tn");
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto blocks = static_cast<std::ptrdiff_t>((m + kTnBlock - 1) / kTnBlock);
#pragma omp parallel for schedule(static) if (m * inner * n > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t m0 = static_cast<std::size_t>(blk) * kTnBlock;
    const std::size_t m1 = std::min(m, m0 + kTnBlock);
    for (std::size_t k = 0; k < inner; ++k) {
      const double* a_row = pa + k * m;
      const double* b_row = pb + k * n;
      for (std::size_t i = m0; i < m1; ++i) {
        const double aki = a_row[i];
        if (aki == 0.0) continue;
        double* c_row = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) c_row[j] += aki * b_row[j];
      }
    }
  }
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + a.shape_string() + " · " + b.shape_string() + "ᵀ");
  }
  matmul(a, transpose(b), c, accumulate);
}

void add_row_vector(Tensor2& y, const Tensor2& bias) {
  if (bias.rows() != 1 || bias.cols() != y.cols()) {
    throw DimensionError("add_row_vector: bias " + bias.shape_string() + " for " +
                         y.shape_string());
  }
  const std::size_t n = y.cols();
  const double* pb = bias.data();
  double* py = y.data();
  const auto rows = static_cast<std::ptrdiff_t>(y.rows());
#pragma omp parallel for schedule(static) if (y.size() > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* row = py + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += pb[j];
  }
}

void column_sums(const Tensor2& x, Tensor2& out, bool accumulate) {
  prepare_output(out, 1, x.cols(), accumulate, "column_sums");
  const std::size_t n = x.cols();
  double* po = out.data();
  // Serial over rows: the reduction order must not depend on thread count.
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* row = x.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) po[j] += row[j];
  }
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 t(a.cols(), a.rows());
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kTile) {
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kTile) {
      const std::size_t i1 = std::min(a.rows(), i0 + kTile);
      const std::size_t j1 = std::min(a.cols(), j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
    }
  }
  return t;
}

}  // namespace edgeguard::kernels
