#pragma once

#include <cstdint>
#include <string>

// Dispatched single-precision kernels for the training hot path. The backend
// is picked once at startup from CPUID (override with ECALAB_KERNELS=scalar|
// avx2|avx512 or set_backend), and every variant is equivalence-tested against
// the scalar reference in kernels_ref.hpp.
namespace ecalab::kern {

enum class Backend { scalar, avx2, avx512 };

const char* backend_name(Backend b);
Backend best_supported_backend();
bool backend_supported(Backend b);
Backend active_backend();
void set_backend(Backend b);  // throws std::runtime_error if unsupported here

// Semantics of all routines match ecalab::kern::ref exactly (up to rounding).
void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
           const float* b, int ldb, float beta, float* c, int ldc);
void softmax_rows(float* x, int rows, int cols);
void softmax_backward_rows(const float* p, const float* dp, float* ds, int rows, int cols);
void layernorm_forward(const float* x, const float* gain, const float* bias, int rows, int cols,
                       float eps, float* y, float* mean, float* rstd);
void layernorm_backward(const float* x, const float* gain, const float* mean, const float* rstd,
                        const float* dy, int rows, int cols, float* dx, float* dgain, float* dbias);
void gelu_forward(const float* x, float* y, int64_t n);
void gelu_backward(const float* x, const float* dy, float* dx, int64_t n);
void adam_update(float* p, const float* g, float* m, float* v, int64_t n, float lr, float beta1,
                 float beta2, float eps, float inv_bias1, float inv_bias2);
void add_bias_rows(float* y, const float* bias, int rows, int cols);
void col_sums(const float* x, int rows, int cols, float* out);
void vec_add(float* x, const float* y, int64_t n);

}  // namespace ecalab::kern
