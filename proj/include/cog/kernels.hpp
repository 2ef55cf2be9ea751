#pragma once

#include <cmath>
#include <cstdint>

// Low-level dense kernels shared by the batch ops and the streaming engine.
// Per-output-element accumulation order is ascending over the contraction
// index everywhere; the stream==batch equivalence tests rely on this.

namespace cog::kern {

template <typename T>
inline T attn_scale(std::int64_t d) {
    return static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
}

// C[m x n] = A[m x k] * B[k x n] (+ optional row-broadcast bias[n])
template <typename T>
inline void matmul_nn(const T* a, const T* b, std::int64_t m, std::int64_t k, std::int64_t n,
                      T* c, const T* bias = nullptr) {
    for (std::int64_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (bias) {
            for (std::int64_t j = 0; j < n; ++j) crow[j] = bias[j];
        } else {
            for (std::int64_t j = 0; j < n; ++j) crow[j] = T(0);
        }
        const T* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
inline void matmul_nn_acc(const T* a, const T* b, std::int64_t m, std::int64_t k, std::int64_t n,
                          T* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] = A[m x k] * B[n x k]^T
template <typename T>
inline void matmul_nt(const T* a, const T* b, std::int64_t m, std::int64_t k, std::int64_t n,
                      T* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] = acc;
        }
    }
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
inline void matmul_nt_acc(const T* a, const T* b, std::int64_t m, std::int64_t k, std::int64_t n,
                          T* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        for (std::int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

// C[k x n] += A[m x k]^T * B[m x n]
template <typename T>
inline void matmul_tn_acc(const T* a, const T* b, std::int64_t m, std::int64_t k, std::int64_t n,
                          T* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            T* crow = c + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// y[n] = x[k] * W[k x n] (+ bias[n]); same per-element order as matmul_nn.
template <typename T>
inline void vecmat(const T* x, const T* w, std::int64_t k, std::int64_t n, T* y,
                   const T* bias = nullptr) {
    matmul_nn(x, w, 1, k, n, y, bias);
}

// out[cout] = bias[cout] + sum_cin K[cout x cin] * in[cin]; 1x1 conv column.
template <typename T>
inline void conv1x1_col(const T* kernel, const T* bias, std::int64_t cout, std::int64_t cin,
                        const T* in, T* out) {
    for (std::int64_t c = 0; c < cout; ++c) {
        T acc = bias ? bias[c] : T(0);
        const T* krow = kernel + c * cin;
        for (std::int64_t i = 0; i < cin; ++i) acc += krow[i] * in[i];
        out[c] = acc;
    }
}

template <typename T>
inline void softmax_inplace(T* x, std::int64_t n) {
    T mx = x[0];
    for (std::int64_t i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
    T sum = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - mx);
        sum += x[i];
    }
    for (std::int64_t i = 0; i < n; ++i) x[i] /= sum;
}

template <typename T>
inline void layer_norm_row(const T* x, const T* gain, const T* offset, std::int64_t d, T eps,
                           T* out) {
    T mean = T(0);
    for (std::int64_t i = 0; i < d; ++i) mean += x[i];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::int64_t i = 0; i < d; ++i) {
        const T c = x[i] - mean;
        var += c * c;
    }
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    for (std::int64_t i = 0; i < d; ++i) out[i] = (x[i] - mean) * inv * gain[i] + offset[i];
}

}  // namespace cog::kern
