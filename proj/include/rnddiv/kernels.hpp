#pragma once

#include <cstdint>
#include <vector>

namespace rnddiv {

// Dense row-major kernels. Inner loops run over the contiguous output row
// (saxpy form) so they vectorize without any FP reassociation by the
// compiler; per output element the additions happen in a fixed k order, so
// results are bitwise reproducible. The 4-way row blocking only reuses
// loaded B rows across outputs, it does not reorder any accumulation.

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* __restrict__ a, const T* __restrict__ b, T* __restrict__ c, int64_t m,
             int64_t k, int64_t n) {
    int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const T* a0 = a + i * k;
        const T* a1 = a0 + k;
        const T* a2 = a1 + k;
        const T* a3 = a2 + k;
        T* c0 = c + i * n;
        T* c1 = c0 + n;
        T* c2 = c1 + n;
        T* c3 = c2 + n;
        for (int64_t l = 0; l < k; ++l) {
            const T* brow = b + l * n;
            const T v0 = a0[l], v1 = a1[l], v2 = a2[l], v3 = a3[l];
            for (int64_t j = 0; j < n; ++j) {
                const T bj = brow[j];
                c0[j] += v0 * bj;
                c1[j] += v1 * bj;
                c2[j] += v2 * bj;
                c3[j] += v3 * bj;
            }
        }
    }
    for (; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t l = 0; l < k; ++l) {
            const T av = arow[l];
            const T* brow = b + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A^T * B with A[k x m], B[k x n]
template <typename T>
void gemm_tn(const T* __restrict__ a, const T* __restrict__ b, T* __restrict__ c, int64_t k,
             int64_t m, int64_t n) {
    int64_t l = 0;
    for (; l + 4 <= k; l += 4) {
        const T* a0 = a + l * m;
        const T* a1 = a0 + m;
        const T* a2 = a1 + m;
        const T* a3 = a2 + m;
        const T* b0 = b + l * n;
        const T* b1 = b0 + n;
        const T* b2 = b1 + n;
        const T* b3 = b2 + n;
        for (int64_t i = 0; i < m; ++i) {
            const T v0 = a0[i], v1 = a1[i], v2 = a2[i], v3 = a3[i];
            T* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) {
                T acc = crow[j];
                acc += v0 * b0[j];
                acc += v1 * b1[j];
                acc += v2 * b2[j];
                acc += v3 * b3[j];
                crow[j] = acc;
            }
        }
    }
    for (; l < k; ++l) {
        const T* arow = a + l * m;
        const T* brow = b + l * n;
        for (int64_t i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// B[n x m] = A^T with A[m x n]
template <typename T>
void transpose(const T* __restrict__ a, T* __restrict__ b, int64_t m, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            b[j * m + i] = a[i * n + j];
        }
    }
}

// C[m x n] += A * B^T with A[m x k], B[n x k]; materializes B^T.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
    std::vector<T> bt(static_cast<size_t>(k) * n);
    transpose(b, bt.data(), n, k);
    gemm_nn(a, bt.data(), c, m, k, n);
}

}  // namespace rnddiv
