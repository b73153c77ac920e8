#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kernels_internal.hpp"

// AVX2+FMA backend. GEMM packs both operands into panel buffers and runs a
// 6x16 FMA microkernel; 12 accumulator registers keep both FMA ports busy.
namespace ecalab::kern::avx2 {
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

inline float hmax(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_max_ps(lo, hi);
    lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_max_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// Cephes-style expf: exp(x) = 2^n * P(r) with r = x - n ln2 split in two
// parts for accuracy. ~1 ulp over the clamped range.
inline __m256 exp256(__m256 x) {
    const __m256 hi = _mm256_set1_ps(88.3762626647949f);
    const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
    const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
    const __m256 ln2_hi = _mm256_set1_ps(0.693359375f);
    const __m256 ln2_lo = _mm256_set1_ps(-2.12194440e-4f);

    x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
    __m256 fx = _mm256_floor_ps(_mm256_fmadd_ps(x, log2e, _mm256_set1_ps(0.5f)));
    x = _mm256_fnmadd_ps(fx, ln2_hi, x);
    x = _mm256_fnmadd_ps(fx, ln2_lo, x);

    const __m256 z = _mm256_mul_ps(x, x);
    __m256 y = _mm256_set1_ps(1.9875691500e-4f);
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
    y = _mm256_fmadd_ps(y, z, x);
    y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));

    __m256i n = _mm256_add_epi32(_mm256_cvttps_epi32(fx), _mm256_set1_epi32(0x7f));
    n = _mm256_slli_epi32(n, 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

inline __m256 tanh256(__m256 x) {
    // tanh(x) = 1 - 2/(exp(2x)+1); exp saturates, so no further clamping needed
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 two = _mm256_set1_ps(2.0f);
    const __m256 e = exp256(_mm256_mul_ps(x, two));
    return _mm256_sub_ps(one, _mm256_div_ps(two, _mm256_add_ps(e, one)));
}

constexpr int MR = 6;
constexpr int NR = 16;
constexpr int KC = 256;
constexpr int MC = 168;  // multiple of MR

// Panels: A as MR-tall column-of-rows slabs, B as NR-wide row-of-cols slabs,
// both padded with zeros so the microkernel never branches on remainders.
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
                _mm256_storeu_ps(bp, _mm256_loadu_ps(src));
                _mm256_storeu_ps(bp + 8, _mm256_loadu_ps(src + 8));
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

void micro_6x16(int kc, const float* ap, const float* bp, float* cbuf) {
    __m256 acc[MR][2];
    for (int r = 0; r < MR; ++r) {
        acc[r][0] = _mm256_setzero_ps();
        acc[r][1] = _mm256_setzero_ps();
    }
    for (int p = 0; p < kc; ++p) {
        const __m256 b0 = _mm256_loadu_ps(bp);
        const __m256 b1 = _mm256_loadu_ps(bp + 8);
        bp += NR;
        for (int r = 0; r < MR; ++r) {
            const __m256 a = _mm256_broadcast_ss(ap + r);
            acc[r][0] = _mm256_fmadd_ps(a, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_ps(a, b1, acc[r][1]);
        }
        ap += MR;
    }
    for (int r = 0; r < MR; ++r) {
        _mm256_storeu_ps(cbuf + r * NR, acc[r][0]);
        _mm256_storeu_ps(cbuf + r * NR + 8, acc[r][1]);
    }
}

void apply_tile(const float* cbuf, float* c, int ldc, int mrem, int nrem, float alpha,
                float beta) {
    if (nrem == NR) {
        const __m256 va = _mm256_set1_ps(alpha);
        for (int r = 0; r < mrem; ++r) {
            float* cr = c + static_cast<int64_t>(r) * ldc;
            __m256 v0 = _mm256_mul_ps(va, _mm256_loadu_ps(cbuf + r * NR));
            __m256 v1 = _mm256_mul_ps(va, _mm256_loadu_ps(cbuf + r * NR + 8));
            if (beta != 0.0f) {
                const __m256 vb = _mm256_set1_ps(beta);
                v0 = _mm256_fmadd_ps(vb, _mm256_loadu_ps(cr), v0);
                v1 = _mm256_fmadd_ps(vb, _mm256_loadu_ps(cr + 8), v1);
            }
            _mm256_storeu_ps(cr, v0);
            _mm256_storeu_ps(cr + 8, v1);
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

    thread_local std::vector<float> apack, bpack;
    apack.resize(static_cast<size_t>(MC) * KC);
    bpack.resize(static_cast<size_t>(KC) * ((n + NR - 1) / NR) * NR);

    alignas(32) float cbuf[MR * NR];

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
                    micro_6x16(kc, ap, bp, cbuf);
                    apply_tile(cbuf, c + static_cast<int64_t>(i0 + i) * ldc + j, ldc,
                               std::min(MR, mc - i), std::min(NR, n - j), alpha, beta_eff);
                }
            }
        }
    }
}

static void softmax_rows(float* x, int rows, int cols) {
    const int body = cols & ~7;
    for (int r = 0; r < rows; ++r) {
        float* row = x + static_cast<int64_t>(r) * cols;

        __m256 vmax = _mm256_set1_ps(-3.4028235e38f);
        for (int c = 0; c < body; c += 8) vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(row + c));
        float mx = body > 0 ? hmax(vmax) : -3.4028235e38f;
        for (int c = body; c < cols; ++c) mx = std::max(mx, row[c]);

        const __m256 vmx = _mm256_set1_ps(mx);
        __m256 vsum = _mm256_setzero_ps();
        for (int c = 0; c < body; c += 8) {
            const __m256 e = exp256(_mm256_sub_ps(_mm256_loadu_ps(row + c), vmx));
            _mm256_storeu_ps(row + c, e);
            vsum = _mm256_add_ps(vsum, e);
        }
        float sum = hsum(vsum);
        for (int c = body; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }

        const float inv = 1.0f / sum;
        const __m256 vinv = _mm256_set1_ps(inv);
        for (int c = 0; c < body; c += 8)
            _mm256_storeu_ps(row + c, _mm256_mul_ps(_mm256_loadu_ps(row + c), vinv));
        for (int c = body; c < cols; ++c) row[c] *= inv;
    }
}

static void softmax_backward_rows(const float* p, const float* dp, float* ds, int rows, int cols) {
    const int body = cols & ~7;
    for (int r = 0; r < rows; ++r) {
        const float* pr = p + static_cast<int64_t>(r) * cols;
        const float* dpr = dp + static_cast<int64_t>(r) * cols;
        float* dsr = ds + static_cast<int64_t>(r) * cols;

        __m256 vdot = _mm256_setzero_ps();
        for (int c = 0; c < body; c += 8)
            vdot = _mm256_fmadd_ps(_mm256_loadu_ps(pr + c), _mm256_loadu_ps(dpr + c), vdot);
        float dot = hsum(vdot);
        for (int c = body; c < cols; ++c) dot += pr[c] * dpr[c];

        const __m256 vd = _mm256_set1_ps(dot);
        for (int c = 0; c < body; c += 8) {
            const __m256 v = _mm256_mul_ps(_mm256_loadu_ps(pr + c),
                                           _mm256_sub_ps(_mm256_loadu_ps(dpr + c), vd));
            _mm256_storeu_ps(dsr + c, v);
        }
        for (int c = body; c < cols; ++c) dsr[c] = pr[c] * (dpr[c] - dot);
    }
}

static void layernorm_forward(const float* x, const float* gain, const float* bias, int rows,
                              int cols, float eps, float* y, float* mean, float* rstd) {
    const int body = cols & ~7;
    const float inv_n = 1.0f / static_cast<float>(cols);
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + static_cast<int64_t>(r) * cols;
        float* yr = y + static_cast<int64_t>(r) * cols;

        __m256 vsum = _mm256_setzero_ps();
        for (int c = 0; c < body; c += 8) vsum = _mm256_add_ps(vsum, _mm256_loadu_ps(xr + c));
        float mu = hsum(vsum);
        for (int c = body; c < cols; ++c) mu += xr[c];
        mu *= inv_n;

        const __m256 vmu = _mm256_set1_ps(mu);
        __m256 vvar = _mm256_setzero_ps();
        for (int c = 0; c < body; c += 8) {
            const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(xr + c), vmu);
            vvar = _mm256_fmadd_ps(d, d, vvar);
        }
        float var = hsum(vvar);
        for (int c = body; c < cols; ++c) {
            const float d = xr[c] - mu;
            var += d * d;
        }
        var *= inv_n;

        const float rs = 1.0f / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;

        const __m256 vrs = _mm256_set1_ps(rs);
        for (int c = 0; c < body; c += 8) {
            const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + c), vmu), vrs);
            const __m256 out =
                _mm256_fmadd_ps(xhat, _mm256_loadu_ps(gain + c), _mm256_loadu_ps(bias + c));
            _mm256_storeu_ps(yr + c, out);
        }
        for (int c = body; c < cols; ++c) yr[c] = (xr[c] - mu) * rs * gain[c] + bias[c];
    }
}

static void layernorm_backward(const float* x, const float* gain, const float* mean,
                               const float* rstd, const float* dy, int rows, int cols, float* dx,
                               float* dgain, float* dbias) {
    const int body = cols & ~7;
    const float inv_n = 1.0f / static_cast<float>(cols);
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + static_cast<int64_t>(r) * cols;
        const float* dyr = dy + static_cast<int64_t>(r) * cols;
        float* dxr = dx + static_cast<int64_t>(r) * cols;
        const __m256 vmu = _mm256_set1_ps(mean[r]);
        const __m256 vrs = _mm256_set1_ps(rstd[r]);

        __m256 vs1 = _mm256_setzero_ps(), vs2 = _mm256_setzero_ps();
        for (int c = 0; c < body; c += 8) {
            const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + c), vmu), vrs);
            const __m256 vdy = _mm256_loadu_ps(dyr + c);
            const __m256 dxhat = _mm256_mul_ps(vdy, _mm256_loadu_ps(gain + c));
            vs1 = _mm256_add_ps(vs1, dxhat);
            vs2 = _mm256_fmadd_ps(dxhat, xhat, vs2);
            _mm256_storeu_ps(dgain + c, _mm256_fmadd_ps(vdy, xhat, _mm256_loadu_ps(dgain + c)));
            _mm256_storeu_ps(dbias + c, _mm256_add_ps(vdy, _mm256_loadu_ps(dbias + c)));
        }
        float s1 = hsum(vs1), s2 = hsum(vs2);
        for (int c = body; c < cols; ++c) {
            const float xhat = (xr[c] - mean[r]) * rstd[r];
            const float dxhat = dyr[c] * gain[c];
            s1 += dxhat;
            s2 += dxhat * xhat;
            dgain[c] += dyr[c] * xhat;
            dbias[c] += dyr[c];
        }

        const __m256 va = _mm256_set1_ps(s1 * inv_n);
        const __m256 vb = _mm256_set1_ps(s2 * inv_n);
        for (int c = 0; c < body; c += 8) {
            const __m256 xhat = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(xr + c), vmu), vrs);
            const __m256 dxhat = _mm256_mul_ps(_mm256_loadu_ps(dyr + c), _mm256_loadu_ps(gain + c));
            const __m256 inner = _mm256_sub_ps(_mm256_sub_ps(dxhat, va), _mm256_mul_ps(xhat, vb));
            _mm256_storeu_ps(dxr + c, _mm256_mul_ps(vrs, inner));
        }
        for (int c = body; c < cols; ++c) {
            const float xhat = (xr[c] - mean[r]) * rstd[r];
            const float dxhat = dyr[c] * gain[c];
            dxr[c] = rstd[r] * (dxhat - s1 * inv_n - xhat * s2 * inv_n);
        }
    }
}

static void gelu_forward(const float* x, float* y, int64_t n) {
    const __m256 k = _mm256_set1_ps(0.7978845608f);
    const __m256 c3 = _mm256_set1_ps(0.044715f);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);
    const int64_t body = n & ~int64_t{7};
    for (int64_t i = 0; i < body; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 v3 = _mm256_mul_ps(v, _mm256_mul_ps(v, v));
        const __m256 u = _mm256_mul_ps(k, _mm256_fmadd_ps(c3, v3, v));
        const __m256 t = tanh256(u);
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_mul_ps(half, v), _mm256_add_ps(one, t)));
    }
    for (int64_t i = body; i < n; ++i) {
        const float u = 0.7978845608f * (x[i] + 0.044715f * x[i] * x[i] * x[i]);
        y[i] = 0.5f * x[i] * (1.0f + std::tanh(u));
    }
}

static void gelu_backward(const float* x, const float* dy, float* dx, int64_t n) {
    const __m256 k = _mm256_set1_ps(0.7978845608f);
    const __m256 c3 = _mm256_set1_ps(0.044715f);
    const __m256 c3x3 = _mm256_set1_ps(3.0f * 0.044715f);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);
    const int64_t body = n & ~int64_t{7};
    for (int64_t i = 0; i < body; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 v2 = _mm256_mul_ps(v, v);
        const __m256 u = _mm256_mul_ps(k, _mm256_fmadd_ps(c3, _mm256_mul_ps(v2, v), v));
        const __m256 t = tanh256(u);
        const __m256 du = _mm256_mul_ps(k, _mm256_fmadd_ps(c3x3, v2, one));
        const __m256 sech2 = _mm256_fnmadd_ps(t, t, one);  // 1 - t^2
        __m256 g = _mm256_mul_ps(half, _mm256_add_ps(one, t));
        g = _mm256_fmadd_ps(_mm256_mul_ps(_mm256_mul_ps(half, v), sech2), du, g);
        _mm256_storeu_ps(dx + i, _mm256_mul_ps(_mm256_loadu_ps(dy + i), g));
    }
    for (int64_t i = body; i < n; ++i) {
        const float u = 0.7978845608f * (x[i] + 0.044715f * x[i] * x[i] * x[i]);
        const float t = std::tanh(u);
        const float du = 0.7978845608f * (1.0f + 3.0f * 0.044715f * x[i] * x[i]);
        dx[i] = dy[i] * (0.5f * (1.0f + t) + 0.5f * x[i] * (1.0f - t * t) * du);
    }
}

static void adam_update(float* p, const float* g, float* m, float* v, int64_t n, float lr,
                        float beta1, float beta2, float eps, float inv_bias1, float inv_bias2) {
    const __m256 vb1 = _mm256_set1_ps(beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2);
    const __m256 vo1 = _mm256_set1_ps(1.0f - beta1);
    const __m256 vo2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 veps = _mm256_set1_ps(eps);
    const __m256 vib1 = _mm256_set1_ps(inv_bias1);
    const __m256 vib2 = _mm256_set1_ps(inv_bias2);
    const int64_t body = n & ~int64_t{7};
    for (int64_t i = 0; i < body; i += 8) {
        const __m256 vg = _mm256_loadu_ps(g + i);
        __m256 vm = _mm256_fmadd_ps(vo1, vg, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
        __m256 vv = _mm256_fmadd_ps(vo2, _mm256_mul_ps(vg, vg),
                                    _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
        _mm256_storeu_ps(m + i, vm);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_mul_ps(vm, vib1);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vv, vib2)), veps);
        const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
    }
    for (int64_t i = body; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] * inv_bias1) / (std::sqrt(v[i] * inv_bias2) + eps);
    }
}

static void add_bias_rows(float* y, const float* bias, int rows, int cols) {
    const int body = cols & ~7;
    for (int r = 0; r < rows; ++r) {
        float* yr = y + static_cast<int64_t>(r) * cols;
        for (int c = 0; c < body; c += 8)
            _mm256_storeu_ps(yr + c, _mm256_add_ps(_mm256_loadu_ps(yr + c), _mm256_loadu_ps(bias + c)));
        for (int c = body; c < cols; ++c) yr[c] += bias[c];
    }
}

static void col_sums(const float* x, int rows, int cols, float* out) {
    std::fill(out, out + cols, 0.0f);
    const int body = cols & ~7;
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + static_cast<int64_t>(r) * cols;
        for (int c = 0; c < body; c += 8)
            _mm256_storeu_ps(out + c, _mm256_add_ps(_mm256_loadu_ps(out + c), _mm256_loadu_ps(xr + c)));
        for (int c = body; c < cols; ++c) out[c] += xr[c];
    }
}

static void vec_add(float* x, const float* y, int64_t n) {
    const int64_t body = n & ~int64_t{7};
    for (int64_t i = 0; i < body; i += 8)
        _mm256_storeu_ps(x + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (int64_t i = body; i < n; ++i) x[i] += y[i];
}

void fill_table(KernelTable& t) {
    t.sgemm = sgemm;
    t.softmax_rows = softmax_rows;
    t.softmax_backward_rows = softmax_backward_rows;
    t.layernorm_forward = layernorm_forward;
    t.layernorm_backward = layernorm_backward;
    t.gelu_forward = gelu_forward;
    t.gelu_backward = gelu_backward;
    t.adam_update = adam_update;
    t.add_bias_rows = add_bias_rows;
    t.col_sums = col_sums;
    t.vec_add = vec_add;
}

}  // namespace ecalab::kern::avx2
