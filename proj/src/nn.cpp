#include "ecalab/nn.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ecalab/kernels.hpp"
#include "ecalab/kernels_ref.hpp"
#include "ecalab/rng.hpp"

namespace ecalab::nn {

namespace {

// float goes through the dispatched SIMD kernels, everything else through the
// scalar reference templates.
template <typename T>
void t_gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
            int ldb, T beta, T* c, int ldc) {
    if constexpr (std::is_same_v<T, float>)
        kern::sgemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    else
        kern::ref::gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
void t_softmax_rows(T* x, int rows, int cols) {
    if constexpr (std::is_same_v<T, float>)
        kern::softmax_rows(x, rows, cols);
    else
        kern::ref::softmax_rows(x, rows, cols);
}

template <typename T>
void t_softmax_backward_rows(const T* p, const T* dp, T* ds, int rows, int cols) {
    if constexpr (std::is_same_v<T, float>)
        kern::softmax_backward_rows(p, dp, ds, rows, cols);
    else
        kern::ref::softmax_backward_rows(p, dp, ds, rows, cols);
}

template <typename T>
void t_layernorm_forward(const T* x, const T* g, const T* b, int rows, int cols, T eps, T* y,
                         T* mean, T* rstd) {
    if constexpr (std::is_same_v<T, float>)
        kern::layernorm_forward(x, g, b, rows, cols, eps, y, mean, rstd);
    else
        kern::ref::layernorm_forward(x, g, b, rows, cols, eps, y, mean, rstd);
}

template <typename T>
void t_layernorm_backward(const T* x, const T* g, const T* mean, const T* rstd, const T* dy,
                          int rows, int cols, T* dx, T* dg, T* db) {
    if constexpr (std::is_same_v<T, float>)
        kern::layernorm_backward(x, g, mean, rstd, dy, rows, cols, dx, dg, db);
    else
        kern::ref::layernorm_backward(x, g, mean, rstd, dy, rows, cols, dx, dg, db);
}

template <typename T>
void t_gelu_forward(const T* x, T* y, int64_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::gelu_forward(x, y, n);
    else
        kern::ref::gelu_forward(x, y, n);
}

template <typename T>
void t_gelu_backward(const T* x, const T* dy, T* dx, int64_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::gelu_backward(x, dy, dx, n);
    else
        kern::ref::gelu_backward(x, dy, dx, n);
}

template <typename T>
void t_add_bias_rows(T* y, const T* bias, int rows, int cols) {
    if constexpr (std::is_same_v<T, float>)
        kern::add_bias_rows(y, bias, rows, cols);
    else
        kern::ref::add_bias_rows(y, bias, rows, cols);
}

template <typename T>
void t_col_sums(const T* x, int rows, int cols, T* out) {
    if constexpr (std::is_same_v<T, float>)
        kern::col_sums(x, rows, cols, out);
    else
        kern::ref::col_sums(x, rows, cols, out);
}

template <typename T>
void t_vec_add(T* x, const T* y, int64_t n) {
    if constexpr (std::is_same_v<T, float>)
        kern::vec_add(x, y, n);
    else
        kern::ref::vec_add(x, y, n);
}

template <typename T>
void check_finite(const Tensor<T>& t, uint32_t layer, const char* what) {
    for (T v : t.v)
        if (!std::isfinite(static_cast<double>(v)))
            throw NumericError("non-finite value in layer " + std::to_string(layer) + " (" + what +
                               ")");
}

template <typename T>
void apply_dropout_forward(Tensor<T>& x, std::vector<uint8_t>& mask, float rate, uint64_t seed) {
    mask.assign(x.size(), 1);
    const T scale = T{1} / (T{1} - static_cast<T>(rate));
    SplitMix64 rng(seed);
    for (size_t i = 0; i < x.size(); ++i) {
        if (rng.next_unit() < rate) {
            mask[i] = 0;
            x.v[i] = 0;
        } else {
            x.v[i] *= scale;
        }
    }
}

template <typename T>
void apply_dropout_backward(Tensor<T>& dx, const std::vector<uint8_t>& mask, float rate) {
    const T scale = T{1} / (T{1} - static_cast<T>(rate));
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] = mask[i] ? dx.v[i] * scale : T{0};
}

constexpr double kLnEps = 1e-5;

}  // namespace

void ModelConfig::validate() const {
    if (num_layers < 1) throw std::invalid_argument("ModelConfig: num_layers must be >= 1");
    if (num_heads < 1 || d_model % num_heads != 0)
        throw std::invalid_argument("ModelConfig: d_model must be divisible by num_heads");
    if (d_ff < 1 || vocab_size < 2 || max_seq_len < 1)
        throw std::invalid_argument("ModelConfig: degenerate dimensions");
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
        throw std::invalid_argument("ModelConfig: dropout_rate must be in [0, 1)");
}

template <typename T>
Parameters<T> alloc_params(const ModelConfig& cfg) {
    cfg.validate();
    const uint32_t D = cfg.d_model, F = cfg.d_ff, V = cfg.vocab_size;
    Parameters<T> p;
    p.tok_emb = Tensor<T>(V, D);
    p.pos_emb = Tensor<T>(cfg.max_seq_len, D);
    p.layers.resize(cfg.num_layers);
    for (auto& L : p.layers) {
        L.ln1_gain = Tensor<T>(1, D);
        L.ln1_bias = Tensor<T>(1, D);
        L.w_qkv = Tensor<T>(D, 3 * D);
        L.b_qkv = Tensor<T>(1, 3 * D);
        L.w_out = Tensor<T>(D, D);
        L.b_out = Tensor<T>(1, D);
        L.ln2_gain = Tensor<T>(1, D);
        L.ln2_bias = Tensor<T>(1, D);
        L.w_ff1 = Tensor<T>(D, F);
        L.b_ff1 = Tensor<T>(1, F);
        L.w_ff2 = Tensor<T>(F, D);
        L.b_ff2 = Tensor<T>(1, D);
    }
    p.ln_f_gain = Tensor<T>(1, D);
    p.ln_f_bias = Tensor<T>(1, D);
    p.w_head = Tensor<T>(D, V);
    p.b_head = Tensor<T>(1, V);
    return p;
}

template <typename T>
Parameters<T> init_params(const ModelConfig& cfg, uint64_t seed) {
    Parameters<T> p = alloc_params<T>(cfg);
    uint64_t index = 0;
    p.for_each([&](const std::string&, ParamKind kind, Tensor<T>& t) {
        SplitMix64 rng(derive_seed(seed, kParamInitTag, index++));
        switch (kind) {
            case ParamKind::Embedding: {
                for (T& v : t.v) v = static_cast<T>((rng.next_unit() * 2.0 - 1.0) * 0.05);
                break;
            }
            case ParamKind::Weight: {
                const double limit = std::sqrt(6.0 / (static_cast<double>(t.rows) + t.cols));
                for (T& v : t.v) v = static_cast<T>((rng.next_unit() * 2.0 - 1.0) * limit);
                break;
            }
            case ParamKind::Gain:
                std::fill(t.v.begin(), t.v.end(), T{1});
                break;
            case ParamKind::Bias:
            case ParamKind::HeadWeight:
                break;  // already zero
        }
    });
    return p;
}

template <typename T>
void Workspace<T>::ensure(const ModelConfig& cfg, uint32_t batch_size, uint32_t seq_len) {
    const uint32_t D = cfg.d_model, F = cfg.d_ff, V = cfg.vocab_size, H = cfg.num_heads;
    const uint32_t BS = batch_size * seq_len;
    if (batch == batch_size && seq == seq_len && cfg_cached == cfg) return;
    cfg_cached = cfg;
    batch = batch_size;
    seq = seq_len;
    layers.assign(cfg.num_layers, {});
    for (auto& L : layers) {
        L.x_in = Tensor<T>(BS, D);
        L.ln1_out = Tensor<T>(BS, D);
        L.qkv = Tensor<T>(BS, 3 * D);
        L.probs = Tensor<T>(batch_size * H * seq_len, seq_len);
        L.ctx = Tensor<T>(BS, D);
        L.x_mid = Tensor<T>(BS, D);
        L.ln2_out = Tensor<T>(BS, D);
        L.ff_pre = Tensor<T>(BS, F);
        L.ff_act = Tensor<T>(BS, F);
        L.mean1.resize(BS);
        L.rstd1.resize(BS);
        L.mean2.resize(BS);
        L.rstd2.resize(BS);
    }
    x_final = Tensor<T>(BS, D);
    ln_f_out = Tensor<T>(BS, D);
    logits = Tensor<T>(BS, V);
    mean_f.resize(BS);
    rstd_f.resize(BS);
    probs_scratch = Tensor<T>(seq_len, seq_len);
    g_a = Tensor<T>(BS, D);
    g_b = Tensor<T>(BS, D);
    g_c = Tensor<T>(BS, D);
    g_qkv = Tensor<T>(BS, 3 * D);
    g_ff = Tensor<T>(BS, F);
    g_p = Tensor<T>(seq_len, seq_len);
    dlogits = Tensor<T>(BS, V);
}

namespace {

template <typename T>
void forward_impl(const ModelConfig& cfg, const Parameters<T>& params, const uint8_t* tokens,
                  uint32_t B, uint32_t S, Workspace<T>& ws, bool cache_probs, bool use_dropout,
                  uint64_t dropout_seed, bool finite_checks) {
    cfg.validate();
    if (S > cfg.max_seq_len)
        throw std::invalid_argument("forward: sequence length " + std::to_string(S) +
                                    " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    if (B < 1 || S < 1) throw std::invalid_argument("forward: empty batch");
    for (size_t i = 0; i < static_cast<size_t>(B) * S; ++i)
        if (tokens[i] >= cfg.vocab_size)
            throw std::invalid_argument("forward: unknown token id " + std::to_string(tokens[i]));

    ws.ensure(cfg, B, S);
    const uint32_t D = cfg.d_model, F = cfg.d_ff, H = cfg.num_heads, Dh = cfg.head_dim();
    const int BS = static_cast<int>(B * S);
    const bool dropout = use_dropout && cfg.dropout_rate > 0.0f;

    // embeddings
    Tensor<T>& x0 = ws.layers[0].x_in;
    for (uint32_t b = 0; b < B; ++b) {
        for (uint32_t s = 0; s < S; ++s) {
            const uint8_t id = tokens[b * S + s];
            T* dst = x0.row(b * S + s);
            const T* te = params.tok_emb.row(id);
            const T* pe = params.pos_emb.row(s);
            for (uint32_t c = 0; c < D; ++c) dst[c] = te[c] + pe[c];
        }
    }

    for (uint32_t l = 0; l < cfg.num_layers; ++l) {
        LayerCache<T>& C = ws.layers[l];
        const LayerParams<T>& P = params.layers[l];

        t_layernorm_forward(C.x_in.data(), P.ln1_gain.data(), P.ln1_bias.data(), BS,
                            static_cast<int>(D), static_cast<T>(kLnEps), C.ln1_out.data(),
                            C.mean1.data(), C.rstd1.data());
        t_gemm<T>(false, false, BS, static_cast<int>(3 * D), static_cast<int>(D), T{1},
                  C.ln1_out.data(), static_cast<int>(D), P.w_qkv.data(), static_cast<int>(3 * D),
                  T{0}, C.qkv.data(), static_cast<int>(3 * D));
        t_add_bias_rows(C.qkv.data(), P.b_qkv.data(), BS, static_cast<int>(3 * D));

        // heads read strided views straight out of the fused qkv buffer;
        // the 1/sqrt(head_dim) factor rides on the score product
        const T scale = T{1} / std::sqrt(static_cast<T>(Dh));
        const int ld_qkv = static_cast<int>(3 * D);
        for (uint32_t b = 0; b < B; ++b) {
            for (uint32_t h = 0; h < H; ++h) {
                const T* q = C.qkv.row(b * S) + h * Dh;
                const T* k = C.qkv.row(b * S) + D + h * Dh;
                const T* v = C.qkv.row(b * S) + 2 * D + h * Dh;
                T* probs = cache_probs ? C.probs.row((b * H + h) * S) : ws.probs_scratch.data();
                t_gemm<T>(false, true, static_cast<int>(S), static_cast<int>(S),
                          static_cast<int>(Dh), scale, q, ld_qkv, k, ld_qkv, T{0}, probs,
                          static_cast<int>(S));
                t_softmax_rows(probs, static_cast<int>(S), static_cast<int>(S));
                t_gemm<T>(false, false, static_cast<int>(S), static_cast<int>(Dh),
                          static_cast<int>(S), T{1}, probs, static_cast<int>(S), v, ld_qkv, T{0},
                          C.ctx.row(b * S) + h * Dh, static_cast<int>(D));
            }
        }

        // attention output projection into x_mid, then residual
        t_gemm<T>(false, false, BS, static_cast<int>(D), static_cast<int>(D), T{1}, C.ctx.data(),
                  static_cast<int>(D), P.w_out.data(), static_cast<int>(D), T{0}, C.x_mid.data(),
                  static_cast<int>(D));
        t_add_bias_rows(C.x_mid.data(), P.b_out.data(), BS, static_cast<int>(D));
        if (dropout)
            apply_dropout_forward(C.x_mid, C.drop_attn, cfg.dropout_rate,
                                  derive_seed(dropout_seed, 2 * l, 0));
        t_vec_add(C.x_mid.data(), C.x_in.data(), static_cast<int64_t>(C.x_mid.size()));

        t_layernorm_forward(C.x_mid.data(), P.ln2_gain.data(), P.ln2_bias.data(), BS,
                            static_cast<int>(D), static_cast<T>(kLnEps), C.ln2_out.data(),
                            C.mean2.data(), C.rstd2.data());
        t_gemm<T>(false, false, BS, static_cast<int>(F), static_cast<int>(D), T{1},
                  C.ln2_out.data(), static_cast<int>(D), P.w_ff1.data(), static_cast<int>(F), T{0},
                  C.ff_pre.data(), static_cast<int>(F));
        t_add_bias_rows(C.ff_pre.data(), P.b_ff1.data(), BS, static_cast<int>(F));
        t_gelu_forward(C.ff_pre.data(), C.ff_act.data(), static_cast<int64_t>(C.ff_pre.size()));

        Tensor<T>& x_out = l + 1 < cfg.num_layers ? ws.layers[l + 1].x_in : ws.x_final;
        t_gemm<T>(false, false, BS, static_cast<int>(D), static_cast<int>(F), T{1},
                  C.ff_act.data(), static_cast<int>(F), P.w_ff2.data(), static_cast<int>(D), T{0},
                  x_out.data(), static_cast<int>(D));
        t_add_bias_rows(x_out.data(), P.b_ff2.data(), BS, static_cast<int>(D));
        if (dropout) {
            apply_dropout_forward(x_out, C.drop_ff, cfg.dropout_rate,
                                  derive_seed(dropout_seed, 2 * l + 1, 0));
        }
        t_vec_add(x_out.data(), C.x_mid.data(), static_cast<int64_t>(x_out.size()));

        if (finite_checks) check_finite(x_out, l, "block output");
    }

    t_layernorm_forward(ws.x_final.data(), params.ln_f_gain.data(), params.ln_f_bias.data(), BS,
                        static_cast<int>(D), static_cast<T>(kLnEps), ws.ln_f_out.data(),
                        ws.mean_f.data(), ws.rstd_f.data());
    t_gemm<T>(false, false, BS, static_cast<int>(cfg.vocab_size), static_cast<int>(D), T{1},
              ws.ln_f_out.data(), static_cast<int>(D), params.w_head.data(),
              static_cast<int>(cfg.vocab_size), T{0}, ws.logits.data(),
              static_cast<int>(cfg.vocab_size));
    t_add_bias_rows(ws.logits.data(), params.b_head.data(), BS, static_cast<int>(cfg.vocab_size));
    if (finite_checks) check_finite(ws.logits, cfg.num_layers, "logits");
}

void validate_batch(const Batch& batch) {
    if (batch.batch_size < 1 || batch.seq_len < 1)
        throw std::invalid_argument("batch: empty batch");
    if (batch.tokens.size() != static_cast<size_t>(batch.batch_size) * batch.seq_len)
        throw std::invalid_argument("batch: token buffer disagrees with batch_size * seq_len");
    if (batch.mask_positions.empty())
        throw std::invalid_argument("batch: degenerate batch with no masked positions");
    uint32_t prev = 0;
    bool first = true;
    for (uint32_t p : batch.mask_positions) {
        if (p >= batch.seq_len)
            throw std::invalid_argument("batch: mask position beyond sequence length");
        if (!first && p <= prev)
            throw std::invalid_argument("batch: mask positions must be strictly increasing");
        prev = p;
        first = false;
    }
    if (batch.target_bits.size() !=
        static_cast<size_t>(batch.batch_size) * batch.mask_positions.size())
        throw std::invalid_argument("batch: target buffer disagrees with mask count");
    for (uint8_t t : batch.target_bits)
        if (t > 1) throw std::invalid_argument("batch: target bits must be 0 or 1");
}

// Per masked row: loss += logsumexp - logit[target]; dlogits = softmax - onehot.
template <typename T>
double masked_loss_and_dlogits(const Tensor<T>& logits, const Batch& batch, Tensor<T>* dlogits) {
    validate_batch(batch);
    const uint32_t V = logits.cols;
    const size_t n_mask = batch.mask_positions.size();
    const double inv_total = 1.0 / (static_cast<double>(batch.batch_size) * n_mask);
    if (dlogits) dlogits->zero();

    double total = 0.0;
    for (uint32_t b = 0; b < batch.batch_size; ++b) {
        for (size_t i = 0; i < n_mask; ++i) {
            const uint32_t row = b * batch.seq_len + batch.mask_positions[i];
            const uint8_t target = batch.target_bits[b * n_mask + i];
            const T* lr = logits.row(row);
            double mx = static_cast<double>(lr[0]);
            for (uint32_t c = 1; c < V; ++c) mx = std::max(mx, static_cast<double>(lr[c]));
            double sum = 0.0;
            for (uint32_t c = 0; c < V; ++c) sum += std::exp(static_cast<double>(lr[c]) - mx);
            total += std::log(sum) - (static_cast<double>(lr[target]) - mx);
            if (dlogits) {
                T* dr = dlogits->row(row);
                const double inv_sum = 1.0 / sum;
                for (uint32_t c = 0; c < V; ++c)
                    dr[c] = static_cast<T>(std::exp(static_cast<double>(lr[c]) - mx) * inv_sum *
                                           inv_total);
                dr[target] -= static_cast<T>(inv_total);
            }
        }
    }
    return total * inv_total;
}

}  // namespace

template <typename T>
void forward(const ModelConfig& cfg, const Parameters<T>& params, const uint8_t* tokens,
             uint32_t batch_size, uint32_t seq_len, Workspace<T>& ws, bool training,
             uint64_t dropout_seed) {
    forward_impl(cfg, params, tokens, batch_size, seq_len, ws, training, training, dropout_seed,
                 training);
}

template <typename T>
Tensor<T> forward_logits(const ModelConfig& cfg, const Parameters<T>& params, const Batch& batch) {
    Workspace<T> ws;
    forward(cfg, params, batch.tokens.data(), batch.batch_size, batch.seq_len, ws);
    return ws.logits;
}

template <typename T>
double loss_from_logits(const Tensor<T>& logits, const Batch& batch) {
    if (logits.rows != batch.batch_size * batch.seq_len)
        throw std::invalid_argument("loss: logits shape disagrees with batch");
    return masked_loss_and_dlogits(logits, batch, static_cast<Tensor<T>*>(nullptr));
}

template <typename T>
double grad(const ModelConfig& cfg, const Parameters<T>& params, const Batch& batch,
            Parameters<T>& grads, Workspace<T>& ws, bool training, uint64_t dropout_seed) {
    validate_batch(batch);
    forward_impl(cfg, params, batch.tokens.data(), batch.batch_size, batch.seq_len, ws,
                 /*cache_probs=*/true, training, dropout_seed, training);

    grads.for_each([](const std::string&, ParamKind, Tensor<T>& t) { t.zero(); });

    const uint32_t B = batch.batch_size, S = batch.seq_len;
    const uint32_t D = cfg.d_model, F = cfg.d_ff, H = cfg.num_heads, Dh = cfg.head_dim();
    const int BS = static_cast<int>(B * S);
    const int iD = static_cast<int>(D), iF = static_cast<int>(F), iS = static_cast<int>(S);
    const int iV = static_cast<int>(cfg.vocab_size);
    const bool dropout = training && cfg.dropout_rate > 0.0f;

    const double loss = masked_loss_and_dlogits(ws.logits, batch, &ws.dlogits);
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");

    // head
    t_gemm<T>(true, false, iD, iV, BS, T{1}, ws.ln_f_out.data(), iD, ws.dlogits.data(), iV, T{0},
              grads.w_head.data(), iV);
    t_col_sums(ws.dlogits.data(), BS, iV, grads.b_head.data());
    t_gemm<T>(false, true, BS, iD, iV, T{1}, ws.dlogits.data(), iV, params.w_head.data(), iV, T{0},
              ws.g_a.data(), iD);

    // final layer norm: dx lands in g_b
    t_layernorm_backward(ws.x_final.data(), params.ln_f_gain.data(), ws.mean_f.data(),
                         ws.rstd_f.data(), ws.g_a.data(), BS, iD, ws.g_b.data(),
                         grads.ln_f_gain.data(), grads.ln_f_bias.data());

    // g_b holds d(block l output) from here on
    for (int l = static_cast<int>(cfg.num_layers) - 1; l >= 0; --l) {
        LayerCache<T>& C = ws.layers[l];
        const LayerParams<T>& P = params.layers[l];
        LayerParams<T>& G = grads.layers[l];

        // FFN branch: g_ff = d(ff_pre) after the two stages below
        Tensor<T>& d_ff_out = ws.g_a;
        d_ff_out.v.assign(ws.g_b.v.begin(), ws.g_b.v.end());
        if (dropout) apply_dropout_backward(d_ff_out, C.drop_ff, cfg.dropout_rate);

        t_gemm<T>(true, false, iF, iD, BS, T{1}, C.ff_act.data(), iF, d_ff_out.data(), iD, T{0},
                  G.w_ff2.data(), iD);
        t_col_sums(d_ff_out.data(), BS, iD, G.b_ff2.data());
        t_gemm<T>(false, true, BS, iF, iD, T{1}, d_ff_out.data(), iD, P.w_ff2.data(), iD, T{0},
                  ws.g_ff.data(), iF);
        t_gelu_backward(C.ff_pre.data(), ws.g_ff.data(), ws.g_ff.data(),
                        static_cast<int64_t>(C.ff_pre.size()));
        t_gemm<T>(true, false, iD, iF, BS, T{1}, C.ln2_out.data(), iD, ws.g_ff.data(), iF, T{0},
                  G.w_ff1.data(), iF);
        t_col_sums(ws.g_ff.data(), BS, iF, G.b_ff1.data());
        t_gemm<T>(false, true, BS, iD, iF, T{1}, ws.g_ff.data(), iF, P.w_ff1.data(), iF, T{0},
                  ws.g_a.data(), iD);

        // d(x_mid) = residual flow + layer-norm backward of the FFN branch
        t_layernorm_backward(C.x_mid.data(), P.ln2_gain.data(), C.mean2.data(), C.rstd2.data(),
                             ws.g_a.data(), BS, iD, ws.g_c.data(), G.ln2_gain.data(),
                             G.ln2_bias.data());
        t_vec_add(ws.g_c.data(), ws.g_b.data(), static_cast<int64_t>(ws.g_c.size()));
        // g_c = d(x_mid)

        // attention branch
        Tensor<T>& d_attn_out = ws.g_b;
        d_attn_out.v.assign(ws.g_c.v.begin(), ws.g_c.v.end());
        if (dropout) apply_dropout_backward(d_attn_out, C.drop_attn, cfg.dropout_rate);

        t_gemm<T>(true, false, iD, iD, BS, T{1}, C.ctx.data(), iD, d_attn_out.data(), iD, T{0},
                  G.w_out.data(), iD);
        t_col_sums(d_attn_out.data(), BS, iD, G.b_out.data());
        t_gemm<T>(false, true, BS, iD, iD, T{1}, d_attn_out.data(), iD, P.w_out.data(), iD, T{0},
                  ws.g_a.data(), iD);
        // g_a = d(ctx)

        const T scale = T{1} / std::sqrt(static_cast<T>(Dh));
        const int ld_qkv = static_cast<int>(3 * D);
        for (uint32_t b = 0; b < B; ++b) {
            for (uint32_t h = 0; h < H; ++h) {
                const T* q = C.qkv.row(b * S) + h * Dh;
                const T* k = C.qkv.row(b * S) + D + h * Dh;
                const T* v = C.qkv.row(b * S) + 2 * D + h * Dh;
                const T* probs = C.probs.row((b * H + h) * S);
                const T* d_ctx_h = ws.g_a.row(b * S) + h * Dh;
                const int iDh = static_cast<int>(Dh);

                // dV (straight into the v slice of g_qkv)
                t_gemm<T>(true, false, iS, iDh, iS, T{1}, probs, iS, d_ctx_h, iD, T{0},
                          ws.g_qkv.row(b * S) + 2 * D + h * Dh, ld_qkv);
                // dP then dS in place
                t_gemm<T>(false, true, iS, iS, iDh, T{1}, d_ctx_h, iD, v, ld_qkv, T{0},
                          ws.g_p.data(), iS);
                t_softmax_backward_rows(probs, ws.g_p.data(), ws.g_p.data(), iS, iS);
                // scores = scale * q k^T, so both dq and dk carry the scale
                t_gemm<T>(false, false, iS, iDh, iS, scale, ws.g_p.data(), iS, k, ld_qkv, T{0},
                          ws.g_qkv.row(b * S) + h * Dh, ld_qkv);
                t_gemm<T>(true, false, iS, iDh, iS, scale, ws.g_p.data(), iS, q, ld_qkv, T{0},
                          ws.g_qkv.row(b * S) + D + h * Dh, ld_qkv);
            }
        }

        t_gemm<T>(true, false, iD, static_cast<int>(3 * D), BS, T{1}, C.ln1_out.data(), iD,
                  ws.g_qkv.data(), static_cast<int>(3 * D), T{0}, G.w_qkv.data(),
                  static_cast<int>(3 * D));
        t_col_sums(ws.g_qkv.data(), BS, static_cast<int>(3 * D), G.b_qkv.data());
        t_gemm<T>(false, true, BS, iD, static_cast<int>(3 * D), T{1}, ws.g_qkv.data(),
                  static_cast<int>(3 * D), P.w_qkv.data(), static_cast<int>(3 * D), T{0},
                  ws.g_a.data(), iD);

        t_layernorm_backward(C.x_in.data(), P.ln1_gain.data(), C.mean1.data(), C.rstd1.data(),
                             ws.g_a.data(), BS, iD, ws.g_b.data(), G.ln1_gain.data(),
                             G.ln1_bias.data());
        t_vec_add(ws.g_b.data(), ws.g_c.data(), static_cast<int64_t>(ws.g_b.size()));
        // g_b = d(x_in) = d(previous block output)

        if (training) check_finite(ws.g_b, l, "backward");
    }

    // embeddings
    for (uint32_t b = 0; b < B; ++b) {
        for (uint32_t s = 0; s < S; ++s) {
            const uint8_t id = batch.tokens[b * S + s];
            const T* src = ws.g_b.row(b * S + s);
            t_vec_add(grads.tok_emb.row(id), src, D);
            t_vec_add(grads.pos_emb.row(s), src, D);
        }
    }

    return loss;
}

AdamState make_adam_state(const ModelConfig& cfg) {
    AdamState st;
    st.m = alloc_params<float>(cfg);
    st.v = alloc_params<float>(cfg);
    return st;
}

float train_step(const ModelConfig& cfg, Parameters<float>& params, AdamState& state,
                 const AdamConfig& adam, const Batch& batch, Parameters<float>& grad_buf,
                 Workspace<float>& ws, uint64_t dropout_seed) {
    const double loss = grad(cfg, params, batch, grad_buf, ws, true, dropout_seed);

    state.step += 1;
    float lr = adam.lr;
    if (adam.warmup_steps > 0 && state.step < adam.warmup_steps)
        lr = adam.lr * static_cast<float>(state.step) / static_cast<float>(adam.warmup_steps);
    const float inv_b1 = 1.0f / (1.0f - std::pow(adam.beta1, static_cast<float>(state.step)));
    const float inv_b2 = 1.0f / (1.0f - std::pow(adam.beta2, static_cast<float>(state.step)));

    // walk (param, grad, m, v) in lockstep; for_each order is fixed
    std::vector<Tensor<float>*> ps, gs, ms, vs;
    params.for_each([&](const std::string&, ParamKind, Tensor<float>& t) { ps.push_back(&t); });
    grad_buf.for_each([&](const std::string&, ParamKind, Tensor<float>& t) { gs.push_back(&t); });
    state.m.for_each([&](const std::string&, ParamKind, Tensor<float>& t) { ms.push_back(&t); });
    state.v.for_each([&](const std::string&, ParamKind, Tensor<float>& t) { vs.push_back(&t); });
    for (size_t i = 0; i < ps.size(); ++i)
        kern::adam_update(ps[i]->data(), gs[i]->data(), ms[i]->data(), vs[i]->data(),
                          static_cast<int64_t>(ps[i]->size()), lr, adam.beta1, adam.beta2,
                          adam.eps, inv_b1, inv_b2);
    return static_cast<float>(loss);
}

namespace {

constexpr char kCheckpointMagic[4] = {'E', 'C', 'K', 'P'};
constexpr uint32_t kCheckpointVersion = 1;

void w_u32(std::ostream& o, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    o.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t r_u32(std::istream& in, const std::string& path) {
    uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataFormatError(path + ": truncated checkpoint");
    return uint32_t{b[0]} | uint32_t{b[1]} << 8 | uint32_t{b[2]} << 16 | uint32_t{b[3]} << 24;
}

}  // namespace

void save_checkpoint(const ModelConfig& cfg, const Parameters<float>& params,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataFormatError(path + ": cannot open for writing");
    out.write(kCheckpointMagic, 4);
    w_u32(out, kCheckpointVersion);
    w_u32(out, cfg.num_layers);
    w_u32(out, cfg.num_heads);
    w_u32(out, cfg.d_model);
    w_u32(out, cfg.d_ff);
    w_u32(out, cfg.vocab_size);
    w_u32(out, cfg.max_seq_len);
    uint32_t drop_bits;
    static_assert(sizeof(float) == 4);
    std::memcpy(&drop_bits, &cfg.dropout_rate, 4);
    w_u32(out, drop_bits);

    params.for_each([&](const std::string& name, ParamKind, const Tensor<float>& t) {
        w_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        w_u32(out, t.rows);
        w_u32(out, t.cols);
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(float)));
    });
    out.flush();
    if (!out) throw DataFormatError(path + ": write failed");
}

std::pair<ModelConfig, Parameters<float>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError(path + ": cannot open");
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic))
        throw DataFormatError(path + ": bad magic, not a checkpoint file");
    const uint32_t version = r_u32(in, path);
    if (version != kCheckpointVersion)
        throw DataFormatError(path + ": unsupported checkpoint version " + std::to_string(version));

    ModelConfig cfg;
    cfg.num_layers = r_u32(in, path);
    cfg.num_heads = r_u32(in, path);
    cfg.d_model = r_u32(in, path);
    cfg.d_ff = r_u32(in, path);
    cfg.vocab_size = r_u32(in, path);
    cfg.max_seq_len = r_u32(in, path);
    const uint32_t drop_bits = r_u32(in, path);
    std::memcpy(&cfg.dropout_rate, &drop_bits, 4);
    cfg.validate();

    Parameters<float> params = alloc_params<float>(cfg);
    params.for_each([&](const std::string& name, ParamKind, Tensor<float>& t) {
        const uint32_t name_len = r_u32(in, path);
        std::string stored(name_len, '\0');
        if (!in.read(stored.data(), name_len)) throw DataFormatError(path + ": truncated checkpoint");
        if (stored != name)
            throw DataFormatError(path + ": tensor '" + stored + "' where '" + name +
                                  "' was expected (config/shape mismatch)");
        const uint32_t rows = r_u32(in, path);
        const uint32_t cols = r_u32(in, path);
        if (rows != t.rows || cols != t.cols)
            throw DataFormatError(path + ": tensor '" + name + "' has shape " +
                                  std::to_string(rows) + "x" + std::to_string(cols) +
                                  ", config implies " + std::to_string(t.rows) + "x" +
                                  std::to_string(t.cols));
        if (!in.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(t.size() * sizeof(float))))
            throw DataFormatError(path + ": truncated checkpoint");
    });
    return {cfg, std::move(params)};
}

// explicit instantiations
template struct Parameters<float>;
template struct Parameters<double>;
template struct Workspace<float>;
template struct Workspace<double>;
template Parameters<float> alloc_params<float>(const ModelConfig&);
template Parameters<double> alloc_params<double>(const ModelConfig&);
template Parameters<float> init_params<float>(const ModelConfig&, uint64_t);
template Parameters<double> init_params<double>(const ModelConfig&, uint64_t);
template void forward<float>(const ModelConfig&, const Parameters<float>&, const uint8_t*,
                             uint32_t, uint32_t, Workspace<float>&, bool, uint64_t);
template void forward<double>(const ModelConfig&, const Parameters<double>&, const uint8_t*,
                              uint32_t, uint32_t, Workspace<double>&, bool, uint64_t);
template Tensor<float> forward_logits<float>(const ModelConfig&, const Parameters<float>&,
                                             const Batch&);
template Tensor<double> forward_logits<double>(const ModelConfig&, const Parameters<double>&,
                                               const Batch&);
template double loss_from_logits<float>(const Tensor<float>&, const Batch&);
template double loss_from_logits<double>(const Tensor<double>&, const Batch&);
template double grad<float>(const ModelConfig&, const Parameters<float>&, const Batch&,
                            Parameters<float>&, Workspace<float>&, bool, uint64_t);
template double grad<double>(const ModelConfig&, const Parameters<double>&, const Batch&,
                             Parameters<double>&, Workspace<double>&, bool, uint64_t);

}  // namespace ecalab::nn
