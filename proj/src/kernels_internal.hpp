#pragma once

#include <cstdint>

// Per-backend entry points. Definitions live in translation units compiled
// with the matching ISA flags; nothing here may be inlined across them.
namespace ecalab::kern {

struct KernelTable {
    void (*sgemm)(bool, bool, int, int, int, float, const float*, int, const float*, int, float,
                  float*, int);
    void (*softmax_rows)(float*, int, int);
    void (*softmax_backward_rows)(const float*, const float*, float*, int, int);
    void (*layernorm_forward)(const float*, const float*, const float*, int, int, float, float*,
                              float*, float*);
    void (*layernorm_backward)(const float*, const float*, const float*, const float*,
                               const float*, int, int, float*, float*, float*);
    void (*gelu_forward)(const float*, float*, int64_t);
    void (*gelu_backward)(const float*, const float*, float*, int64_t);
    void (*adam_update)(float*, const float*, float*, float*, int64_t, float, float, float, float,
                        float, float);
    void (*add_bias_rows)(float*, const float*, int, int);
    void (*col_sums)(const float*, int, int, float*);
    void (*vec_add)(float*, const float*, int64_t);
};

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void fill_table(KernelTable& t);
}
namespace avx512 {
void fill_table(KernelTable& t);  // overrides the GEMM only
}
#endif

}  // namespace ecalab::kern
