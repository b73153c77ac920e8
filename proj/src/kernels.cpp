#include "ecalab/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ecalab/kernels_ref.hpp"
#include "kernels_internal.hpp"

namespace ecalab::kern {

namespace {

KernelTable make_scalar_table() {
    KernelTable t;
    t.sgemm = ref::gemm<float>;
    t.softmax_rows = ref::softmax_rows<float>;
    t.softmax_backward_rows = ref::softmax_backward_rows<float>;
    t.layernorm_forward = ref::layernorm_forward<float>;
    t.layernorm_backward = ref::layernorm_backward<float>;
    t.gelu_forward = ref::gelu_forward<float>;
    t.gelu_backward = ref::gelu_backward<float>;
    t.adam_update = ref::adam_update<float>;
    t.add_bias_rows = ref::add_bias_rows<float>;
    t.col_sums = ref::col_sums<float>;
    t.vec_add = ref::vec_add<float>;
    return t;
}

KernelTable make_table(Backend b) {
    KernelTable t = make_scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2 || b == Backend::avx512) avx2::fill_table(t);
    if (b == Backend::avx512) avx512::fill_table(t);
#endif
    return t;
}

struct Dispatch {
    Backend backend;
    KernelTable table;

    Dispatch() : backend(initial_backend()), table(make_table(backend)) {}

    static Backend initial_backend() {
        if (const char* env = std::getenv("ECALAB_KERNELS")) {
            const std::string s(env);
            Backend want;
            if (s == "scalar")
                want = Backend::scalar;
            else if (s == "avx2")
                want = Backend::avx2;
            else if (s == "avx512")
                want = Backend::avx512;
            else
                throw std::runtime_error("ECALAB_KERNELS must be scalar, avx2 or avx512");
            if (!backend_supported(want))
                throw std::runtime_error(std::string("ECALAB_KERNELS=") + s +
                                         " not supported by this CPU");
            return want;
        }
        return best_supported_backend();
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::avx512: return "avx512";
    }
    return "?";
}

bool backend_supported(Backend b) {
    if (b == Backend::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2) return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (b == Backend::avx512) return __builtin_cpu_supports("avx512f");
#endif
    return false;
}

Backend best_supported_backend() {
    if (backend_supported(Backend::avx512)) return Backend::avx512;
    if (backend_supported(Backend::avx2)) return Backend::avx2;
    return Backend::scalar;
}

Backend active_backend() {
    return dispatch().backend;
}

void set_backend(Backend b) {
    if (!backend_supported(b))
        throw std::runtime_error(std::string("kernel backend ") + backend_name(b) +
                                 " not supported by this CPU");
    dispatch().backend = b;
    dispatch().table = make_table(b);
}

void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
           const float* b, int ldb, float beta, float* c, int ldc) {
    dispatch().table.sgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void softmax_rows(float* x, int rows, int cols) {
    dispatch().table.softmax_rows(x, rows, cols);
}
void softmax_backward_rows(const float* p, const float* dp, float* ds, int rows, int cols) {
    dispatch().table.softmax_backward_rows(p, dp, ds, rows, cols);
}
void layernorm_forward(const float* x, const float* gain, const float* bias, int rows, int cols,
                       float eps, float* y, float* mean, float* rstd) {
    dispatch().table.layernorm_forward(x, gain, bias, rows, cols, eps, y, mean, rstd);
}
void layernorm_backward(const float* x, const float* gain, const float* mean, const float* rstd,
                        const float* dy, int rows, int cols, float* dx, float* dgain,
                        float* dbias) {
    dispatch().table.layernorm_backward(x, gain, mean, rstd, dy, rows, cols, dx, dgain, dbias);
}
void gelu_forward(const float* x, float* y, int64_t n) {
    dispatch().table.gelu_forward(x, y, n);
}
void gelu_backward(const float* x, const float* dy, float* dx, int64_t n) {
    dispatch().table.gelu_backward(x, dy, dx, n);
}
void adam_update(float* p, const float* g, float* m, float* v, int64_t n, float lr, float beta1,
                 float beta2, float eps, float inv_bias1, float inv_bias2) {
    dispatch().table.adam_update(p, g, m, v, n, lr, beta1, beta2, eps, inv_bias1, inv_bias2);
}
void add_bias_rows(float* y, const float* bias, int rows, int cols) {
    dispatch().table.add_bias_rows(y, bias, rows, cols);
}
void col_sums(const float* x, int rows, int cols, float* out) {
    dispatch().table.col_sums(x, rows, cols, out);
}
void vec_add(float* x, const float* y, int64_t n) {
    dispatch().table.vec_add(x, y, n);
}

}  // namespace ecalab::kern
