#pragma once

// Dense linear-algebra kernels behind every layer.
//
// The default kernels are OpenMP-parallel over output rows. Each output element
// is accumulated in ascending inner-index order by the same per-row routine no
// matter how rows are split across threads, so results are bit-identical for
// any thread count. The `reference` namespace holds naive serial triple loops
// used only as test oracles and benchmark baselines.

#include "edgeguard/tensor.hpp"

namespace edgeguard::kernels {

// C = A·B, or C += A·B when accumulate is set. C is resized when overwriting.
void matmul(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);

// C = Aᵀ·B (A is K×M, B is K×N, C is M×N).
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);

// C = A·Bᵀ (A is M×K, B is N×K, C is M×N).
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);

// y[i, :] += bias[0, :]
void add_row_vector(Tensor2& y, const Tensor2& bias);

// out[0, j] (+)= sum_i x[i, j], summed in ascending row order.
void column_sums(const Tensor2& x, Tensor2& out, bool accumulate = false);

Tensor2 transpose(const Tensor2& a);

// Number of threads the parallel kernels will use (1 when built without OpenMP).
int max_threads();

namespace reference {

void matmul(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);
void column_sums(const Tensor2& x, Tensor2& out, bool accumulate = false);

}  // namespace reference

}  // namespace edgeguard::kernels
