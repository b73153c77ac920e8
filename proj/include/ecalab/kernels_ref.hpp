#pragma once

#include <cmath>
#include <cstdint>

// Scalar reference kernels, templated on the element type. These are the
// ground truth the SIMD backends are equivalence-tested against, and they
// double as the double-precision path used by gradient verification.
namespace ecalab::kern::ref {

// C = alpha * op(A) * op(B) + beta * C, row-major. beta == 0 never reads C.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T acc = 0;
            for (int p = 0; p < k; ++p) {
                const T av = trans_a ? a[static_cast<int64_t>(p) * lda + i]
                                     : a[static_cast<int64_t>(i) * lda + p];
                const T bv = trans_b ? b[static_cast<int64_t>(j) * ldb + p]
                                     : b[static_cast<int64_t>(p) * ldb + j];
                acc += av * bv;
            }
            T* out = &c[static_cast<int64_t>(i) * ldc + j];
            *out = alpha * acc + (beta == T{0} ? T{0} : beta * *out);
        }
    }
}

template <typename T>
void softmax_rows(T* x, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        T* row = x + static_cast<int64_t>(r) * cols;
        T mx = row[0];
        for (int c = 1; c < cols; ++c) mx = row[c] > mx ? row[c] : mx;
        T sum = 0;
        for (int c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        const T inv = T{1} / sum;
        for (int c = 0; c < cols; ++c) row[c] *= inv;
    }
}

// ds = p * (dp - sum_c(p * dp)) rowwise; ds may alias dp.
template <typename T>
void softmax_backward_rows(const T* p, const T* dp, T* ds, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const T* pr = p + static_cast<int64_t>(r) * cols;
        const T* dpr = dp + static_cast<int64_t>(r) * cols;
        T* dsr = ds + static_cast<int64_t>(r) * cols;
        T dot = 0;
        for (int c = 0; c < cols; ++c) dot += pr[c] * dpr[c];
        for (int c = 0; c < cols; ++c) dsr[c] = pr[c] * (dpr[c] - dot);
    }
}

template <typename T>
void layernorm_forward(const T* x, const T* gain, const T* bias, int rows, int cols, T eps, T* y,
                       T* mean, T* rstd) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<int64_t>(r) * cols;
        T* yr = y + static_cast<int64_t>(r) * cols;
        T mu = 0;
        for (int c = 0; c < cols; ++c) mu += xr[c];
        mu /= cols;
        T var = 0;
        for (int c = 0; c < cols; ++c) {
            const T d = xr[c] - mu;
            var += d * d;
        }
        var /= cols;
        const T rs = T{1} / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        for (int c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * rs * gain[c] + bias[c];
    }
}

// dgain/dbias are accumulated ACROSS rows into caller-zeroed buffers;
// dx is overwritten.
template <typename T>
void layernorm_backward(const T* x, const T* gain, const T* mean, const T* rstd, const T* dy,
                        int rows, int cols, T* dx, T* dgain, T* dbias) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<int64_t>(r) * cols;
        const T* dyr = dy + static_cast<int64_t>(r) * cols;
        T* dxr = dx + static_cast<int64_t>(r) * cols;
        const T mu = mean[r], rs = rstd[r];
        T sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int c = 0; c < cols; ++c) {
            const T xhat = (xr[c] - mu) * rs;
            const T dxhat = dyr[c] * gain[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            dgain[c] += dyr[c] * xhat;
            dbias[c] += dyr[c];
        }
        const T inv_n = T{1} / cols;
        for (int c = 0; c < cols; ++c) {
            const T xhat = (xr[c] - mu) * rs;
            const T dxhat = dyr[c] * gain[c];
            dxr[c] = rs * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
        }
    }
}

// tanh-form gelu, smooth everywhere (matters for finite-difference checks).
template <typename T>
T gelu_one(T x) {
    const T k = T{0.7978845608028654};  // sqrt(2/pi)
    const T u = k * (x + T{0.044715} * x * x * x);
    return T{0.5} * x * (T{1} + std::tanh(u));
}

template <typename T>
T gelu_grad_one(T x) {
    const T k = T{0.7978845608028654};
    const T u = k * (x + T{0.044715} * x * x * x);
    const T t = std::tanh(u);
    const T du = k * (T{1} + T{3} * T{0.044715} * x * x);
    return T{0.5} * (T{1} + t) + T{0.5} * x * (T{1} - t * t) * du;
}

template <typename T>
void gelu_forward(const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

template <typename T>
void gelu_backward(const T* x, const T* dy, T* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad_one(x[i]);
}

// One adaptive-moment update; bias corrections are passed in as
// 1/(1-beta1^t) and 1/(1-beta2^t).
template <typename T>
void adam_update(T* p, const T* g, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
                 T inv_bias1, T inv_bias2) {
    for (int64_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T{1} - beta1) * g[i];
        v[i] = beta2 * v[i] + (T{1} - beta2) * g[i] * g[i];
        const T mhat = m[i] * inv_bias1;
        const T vhat = v[i] * inv_bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template <typename T>
void add_bias_rows(T* y, const T* bias, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        T* yr = y + static_cast<int64_t>(r) * cols;
        for (int c = 0; c < cols; ++c) yr[c] += bias[c];
    }
}

template <typename T>
void col_sums(const T* x, int rows, int cols, T* out) {
    for (int c = 0; c < cols; ++c) out[c] = 0;
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<int64_t>(r) * cols;
        for (int c = 0; c < cols; ++c) out[c] += xr[c];
    }
}

template <typename T>
void vec_add(T* x, const T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) x[i] += y[i];
}

}  // namespace ecalab::kern::ref
