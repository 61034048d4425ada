// Naive serial kernels. Oracles for the parallel versions; never on a hot path.

#include "edgeguard/error.hpp"
#include "edgeguard/kernels.hpp"

namespace edgeguard::kernels::reference {
namespace {

void check_output(Tensor2& c, std::size_t rows, std::size_t cols, bool accumulate) {
  if (!accumulate) {
    c = Tensor2(rows, cols);
  } else if (c.rows() != rows || c.cols() != cols) {
    throw DimensionError("reference kernel: accumulator shape mismatch");
  }
}

}  // namespace

void matmul(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.rows()) throw DimensionError("reference::matmul: inner dims differ");
  check_output(c, a.rows(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
      c(i, j) += sum;
    }
  }
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.rows() != b.rows()) throw DimensionError("reference::matmul_tn: inner dims differ");
  check_output(c, a.cols(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) sum += a(k, i) * b(k, j);
      c(i, j) += sum;
    }
  }
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  if (a.cols() != b.cols()) throw DimensionError("reference::matmul_nt: inner dims differ");
  check_output(c, a.rows(), b.rows(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(j, k);
      c(i, j) += sum;
    }
  }
}

void column_sums(const Tensor2& x, Tensor2& out, bool accumulate) {
  check_output(out, 1, x.cols(), accumulate);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) sum += x(i, j);
    out(0, j) += sum;
  }
}

}  // namespace edgeguard::kernels::reference
