#include <immintrin.h>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "kernels_internal.hpp"

// AVX-512F GEMM with an 8x32 microkernel (16 zmm accumulators). Everything
// else stays on the AVX2 implementations; the GEMM carries nearly all of the
// training flops, so it is the only kernel worth a wider variant.
namespace ecalab::kern::avx512 {
namespace {

constexpr int MR = 8;
constexpr int NR = 32;
constexpr int KC = 256;
constexpr int MC = 160;  // multiple of MR

void pack_a(bool trans_a, const float* a, int lda, int m0, int mc, int k0, int kc, float* ap) {
    for (int i = 0; i < mc; i += MR) {
        const int mr = std::min(MR, mc - i);
        for (int p = 0; p < kc; ++p) {
            for (int r = 0; r < MR; ++r) {
                float v = 0.0f;
                if (r < mr) {
                    const int64_t gi = m0 + i + r, gp = k0 + p;
                    v = trans_a ? a[gp * lda + gi] : a[gi * lda + gp];
                }
                *ap++ = v;
            }
        }
    }
}

void pack_b(bool trans_b, const float* b, int ldb, int k0, int kc, int n0, int nc, float* bp) {
    for (int j = 0; j < nc; j += NR) {
        const int nr = std::min(NR, nc - j);
        for (int p = 0; p < kc; ++p) {
            const int64_t gp = k0 + p;
            if (!trans_b && nr == NR) {
                const float* src = b + gp * ldb + n0 + j;
                _mm512_storeu_ps(bp, _mm512_loadu_ps(src));
                _mm512_storeu_ps(bp + 16, _mm512_loadu_ps(src + 16));
                bp += NR;
                continue;
            }
            for (int c = 0; c < NR; ++c) {
                float v = 0.0f;
                if (c < nr) {
                    const int64_t gj = n0 + j + c;
                    v = trans_b ? b[gj * ldb + gp] : b[gp * ldb + gj];
                }
                *bp++ = v;
            }
        }
    }
}

void micro_8x32(int kc, const float* ap, const float* bp, float* cbuf) {
    __m512 acc[MR][2];
    for (int r = 0; r < MR; ++r) {
        acc[r][0] = _mm512_setzero_ps();
        acc[r][1] = _mm512_setzero_ps();
    }
    for (int p = 0; p < kc; ++p) {
        const __m512 b0 = _mm512_loadu_ps(bp);
        const __m512 b1 = _mm512_loadu_ps(bp + 16);
        bp += NR;
        for (int r = 0; r < MR; ++r) {
            const __m512 a = _mm512_set1_ps(ap[r]);
            acc[r][0] = _mm512_fmadd_ps(a, b0, acc[r][0]);
            acc[r][1] = _mm512_fmadd_ps(a, b1, acc[r][1]);
        }
        ap += MR;
    }
    for (int r = 0; r < MR; ++r) {
        _mm512_storeu_ps(cbuf + r * NR, acc[r][0]);
        _mm512_storeu_ps(cbuf + r * NR + 16, acc[r][1]);
    }
}

// Narrow-output microkernel for n <= 16 (the attention value/gradient GEMMs):
// 12 rows of one zmm each keeps the FMA-to-load ratio high.
constexpr int MRN = 12;
constexpr int NRN = 16;

void micro_12x16(int kc, const float* ap, const float* bp, float* cbuf) {
    __m512 acc[MRN];
    for (int r = 0; r < MRN; ++r) acc[r] = _mm512_setzero_ps();
    for (int p = 0; p < kc; ++p) {
        const __m512 b0 = _mm512_loadu_ps(bp);
        bp += NRN;
        for (int r = 0; r < MRN; ++r)
            acc[r] = _mm512_fmadd_ps(_mm512_set1_ps(ap[r]), b0, acc[r]);
        ap += MRN;
    }
    for (int r = 0; r < MRN; ++r) _mm512_storeu_ps(cbuf + r * NRN, acc[r]);
}

void pack_a_narrow(bool trans_a, const float* a, int lda, int m0, int mc, int k0, int kc,
                   float* ap) {
    for (int i = 0; i < mc; i += MRN) {
        const int mr = std::min(MRN, mc - i);
        for (int p = 0; p < kc; ++p) {
            for (int r = 0; r < MRN; ++r) {
                float v = 0.0f;
                if (r < mr) {
                    const int64_t gi = m0 + i + r, gp = k0 + p;
                    v = trans_a ? a[gp * lda + gi] : a[gi * lda + gp];
                }
                *ap++ = v;
            }
        }
    }
}

void apply_tile_narrow(const float* cbuf, float* c, int ldc, int mrem, int nrem, float alpha,
                       float beta) {
    const __mmask16 mask = static_cast<__mmask16>((1u << nrem) - 1);
    const __m512 va = _mm512_set1_ps(alpha);
    for (int r = 0; r < mrem; ++r) {
        float* cr = c + static_cast<int64_t>(r) * ldc;
        __m512 v = _mm512_mul_ps(va, _mm512_loadu_ps(cbuf + r * NRN));
        if (beta != 0.0f)
            v = _mm512_fmadd_ps(_mm512_set1_ps(beta), _mm512_maskz_loadu_ps(mask, cr), v);
        _mm512_mask_storeu_ps(cr, mask, v);
    }
}

void sgemm_narrow(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                  int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    thread_local std::vector<float> apack, bpack;
    apack.resize(static_cast<size_t>((m + MRN - 1) / MRN) * MRN * std::min(k, KC));
    bpack.resize(static_cast<size_t>(std::min(k, KC)) * NRN);

    alignas(64) float cbuf[MRN * NRN];
    for (int p0 = 0; p0 < k; p0 += KC) {
        const int kc = std::min(KC, k - p0);
        // one NRN-wide B panel covers the whole output
        float* bp = bpack.data();
        for (int p = 0; p < kc; ++p) {
            const int64_t gp = p0 + p;
            for (int cidx = 0; cidx < NRN; ++cidx) {
                float v = 0.0f;
                if (cidx < n)
                    v = trans_b ? b[static_cast<int64_t>(cidx) * ldb + gp] : b[gp * ldb + cidx];
                *bp++ = v;
            }
        }
        pack_a_narrow(trans_a, a, lda, 0, m, p0, kc, apack.data());
        const float beta_eff = p0 == 0 ? beta : 1.0f;
        for (int i = 0; i < m; i += MRN) {
            micro_12x16(kc, apack.data() + static_cast<size_t>(i / MRN) * kc * MRN, bpack.data(),
                        cbuf);
            apply_tile_narrow(cbuf, c + static_cast<int64_t>(i) * ldc, ldc, std::min(MRN, m - i),
                              n, alpha, beta_eff);
        }
    }
}

void apply_tile(const float* cbuf, float* c, int ldc, int mrem, int nrem, float alpha,
                float beta) {
    if (nrem == NR) {
        const __m512 va = _mm512_set1_ps(alpha);
        for (int r = 0; r < mrem; ++r) {
            float* cr = c + static_cast<int64_t>(r) * ldc;
            __m512 v0 = _mm512_mul_ps(va, _mm512_loadu_ps(cbuf + r * NR));
            __m512 v1 = _mm512_mul_ps(va, _mm512_loadu_ps(cbuf + r * NR + 16));
            if (beta != 0.0f) {
                const __m512 vb = _mm512_set1_ps(beta);
                v0 = _mm512_fmadd_ps(vb, _mm512_loadu_ps(cr), v0);
                v1 = _mm512_fmadd_ps(vb, _mm512_loadu_ps(cr + 16), v1);
            }
            _mm512_storeu_ps(cr, v0);
            _mm512_storeu_ps(cr + 16, v1);
        }
        return;
    }
    for (int r = 0; r < mrem; ++r) {
        float* cr = c + static_cast<int64_t>(r) * ldc;
        for (int j = 0; j < nrem; ++j)
            cr[j] = alpha * cbuf[r * NR + j] + (beta == 0.0f ? 0.0f : beta * cr[j]);
    }
}

void scale_matrix(float* c, int ldc, int m, int n, float beta) {
    for (int i = 0; i < m; ++i) {
        float* cr = c + static_cast<int64_t>(i) * ldc;
        if (beta == 0.0f)
            std::fill(cr, cr + n, 0.0f);
        else
            for (int j = 0; j < n; ++j) cr[j] *= beta;
    }
}

}  // namespace

static void sgemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                  int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    if (m <= 0 || n <= 0) return;
    if (k <= 0 || alpha == 0.0f) {
        scale_matrix(c, ldc, m, n, beta);
        return;
    }
    if (n <= NRN) {
        sgemm_narrow(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
        return;
    }

    thread_local std::vector<float> apack, bpack;
    apack.resize(static_cast<size_t>(MC) * KC);
    bpack.resize(static_cast<size_t>(KC) * ((n + NR - 1) / NR) * NR);

    alignas(64) float cbuf[MR * NR];

    for (int p0 = 0; p0 < k; p0 += KC) {
        const int kc = std::min(KC, k - p0);
        pack_b(trans_b, b, ldb, p0, kc, 0, n, bpack.data());
        const float beta_eff = p0 == 0 ? beta : 1.0f;
        for (int i0 = 0; i0 < m; i0 += MC) {
            const int mc = std::min(MC, m - i0);
            pack_a(trans_a, a, lda, i0, mc, p0, kc, apack.data());
            for (int i = 0; i < mc; i += MR) {
                const float* ap = apack.data() + static_cast<size_t>(i / MR) * kc * MR;
                for (int j = 0; j < n; j += NR) {
                    const float* bp = bpack.data() + static_cast<size_t>(j / NR) * kc * NR;
                    micro_8x32(kc, ap, bp, cbuf);
                    apply_tile(cbuf, c + static_cast<int64_t>(i0 + i) * ldc + j, ldc,
                               std::min(MR, mc - i), std::min(NR, n - j), alpha, beta_eff);
                }
            }
        }
    }
}

void fill_table(KernelTable& t) {
    t.sgemm = sgemm;
}

}  // namespace ecalab::kern::avx512
