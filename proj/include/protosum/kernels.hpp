#pragma once

#include <cstddef>

namespace protosum::kernels {

enum class Trans { kNo, kYes };

// C (m x n) = op(A) * op(B), or C += ... when accumulate is set.
// op(A) is m x k and op(B) is k x n; all operands are row-major and dense.
//
// gemm() is the production kernel: cache-friendly loop order and an OpenMP
// parallel loop over output rows once the product is large enough. Every
// output element is reduced over k in the same order regardless of thread
// count, so results are bit-identical for any OMP_NUM_THREADS.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate);

// Textbook triple loop, kept as the reference the tests compare against.
void gemm_reference(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool accumulate);

// Work (m*n*k) above which gemm() opens a parallel region.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 18;

// Row-wise softmax with optional additive mask (same shape as x, may be null).
void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const double* mask,
                  double* out);

}  // namespace protosum::kernels
