#include "protosum/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace protosum::kernels {

namespace {

inline double at(const double* x, Trans t, std::size_t r, std::size_t c, std::size_t rows,
                 std::size_t cols) {
    // x holds op(x) of shape rows x cols; when transposed the storage is cols x rows.
    return t == Trans::kNo ? x[r * cols + c] : x[c * rows + r];
}

}  // namespace

void gemm_reference(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                s += at(a, ta, i, p, m, k) * at(b, tb, p, j, k, n);
            }
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

namespace {

// C rows [i0, i0+4) += op(A) rows times B (k x n, row-major). Four output rows share each B row load.
void gemm_rows4(Trans ta, std::size_t i0, std::size_t m, std::size_t n, std::size_t k,
                const double* a, const double* b, double* c) {
    double* c0 = c + i0 * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
        const double a0 = at(a, ta, i0, p, m, k);
        const double a1 = at(a, ta, i0 + 1, p, m, k);
        const double a2 = at(a, ta, i0 + 2, p, m, k);
        const double a3 = at(a, ta, i0 + 3, p, m, k);
        const double* brow = b + p * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) {
            const double bv = brow[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
        }
    }
}

void gemm_row(Trans ta, std::size_t i, std::size_t m, std::size_t n, std::size_t k,
              const double* a, const double* b, double* c) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
        const double av = at(a, ta, i, p, m, k);
        if (av == 0.0) continue;
        const double* brow = b + p * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

}  // namespace

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
    const bool parallel = m > 1 && m * n * k >= kParallelWorkThreshold;

    if (tb == Trans::kYes && m < 4) {
        // Few output rows: contiguous dot products against the rows of B.
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += at(a, ta, i, p, m, k) * brow[p];
                crow[j] = accumulate ? crow[j] + s : s;
            }
        }
        return;
    }

    std::vector<double> bt;
    if (tb == Trans::kYes) {
        bt.resize(k * n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
        }
        b = bt.data();
    }
    if (!accumulate) std::fill(c, c + m * n, 0.0);

    const auto blocks = static_cast<long>(m / 4);
#pragma omp parallel for schedule(static) if (parallel)
    for (long bi = 0; bi < blocks; ++bi) {
        gemm_rows4(ta, static_cast<std::size_t>(bi) * 4, m, n, k, a, b, c);
    }
    for (std::size_t i = static_cast<std::size_t>(blocks) * 4; i < m; ++i) gemm_row(ta, i, m, n, k, a, b, c);
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* x, const double* mask,
                  double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        const double* mr = mask != nullptr ? mask + r * cols : nullptr;
        double* orow = out + r * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c) {
            orow[c] = mr != nullptr ? xr[c] + mr[c] : xr[c];
            mx = std::max(mx, orow[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            orow[c] = std::exp(orow[c] - mx);
            sum += orow[c];
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < cols; ++c) orow[c] *= inv;
    }
}

}  // namespace protosum::kernels
