#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ecalab/errors.hpp"

namespace ecalab::nn {

// Transformer encoder with full bidirectional self-attention, pre-layer-norm
// residual blocks, learned absolute positional embeddings, and a 4-way token
// head. The same templated implementation runs in float (training) and double
// (gradient verification).
struct ModelConfig {
    uint32_t num_layers = 2;
    uint32_t num_heads = 4;
    uint32_t d_model = 64;
    uint32_t d_ff = 256;
    uint32_t vocab_size = 4;
    uint32_t max_seq_len = 512;
    float dropout_rate = 0.0f;

    void validate() const;
    uint32_t head_dim() const { return d_model / num_heads; }
    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Tensor {
    uint32_t rows = 0, cols = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(uint32_t r, uint32_t c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, T{}) {}

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    size_t size() const { return v.size(); }
    T& at(uint32_t r, uint32_t c) { return v[static_cast<size_t>(r) * cols + c]; }
    T at(uint32_t r, uint32_t c) const { return v[static_cast<size_t>(r) * cols + c]; }
    T* row(uint32_t r) { return v.data() + static_cast<size_t>(r) * cols; }
    const T* row(uint32_t r) const { return v.data() + static_cast<size_t>(r) * cols; }
    void zero() { std::fill(v.begin(), v.end(), T{}); }
};

enum class ParamKind { Embedding, Weight, Bias, Gain, HeadWeight };

template <typename T>
struct LayerParams {
    Tensor<T> ln1_gain, ln1_bias;
    Tensor<T> w_qkv, b_qkv;  // d_model x 3*d_model, fused q|k|v
    Tensor<T> w_out, b_out;
    Tensor<T> ln2_gain, ln2_bias;
    Tensor<T> w_ff1, b_ff1, w_ff2, b_ff2;
};

template <typename T>
struct Parameters {
    Tensor<T> tok_emb, pos_emb;
    std::vector<LayerParams<T>> layers;
    Tensor<T> ln_f_gain, ln_f_bias;
    Tensor<T> w_head, b_head;

    // Visits every tensor in a fixed order: f(name, kind, tensor).
    template <typename F>
    void for_each(F&& f);
    template <typename F>
    void for_each(F&& f) const;
    size_t count() const;
};

// Token-id batch for one task layout: every row shares seq_len and the mask
// positions; target_bits holds batch_size * mask_positions.size() bits.
struct Batch {
    uint32_t batch_size = 0;
    uint32_t seq_len = 0;
    std::vector<uint8_t> tokens;
    std::vector<uint32_t> mask_positions;
    std::vector<uint8_t> target_bits;
};

template <typename T>
struct LayerCache {
    Tensor<T> x_in, ln1_out, qkv, probs, ctx, x_mid, ln2_out, ff_pre, ff_act;
    std::vector<T> mean1, rstd1, mean2, rstd2;
    std::vector<uint8_t> drop_attn, drop_ff;
};

// Activation caches plus scratch, reusable across calls; resized lazily.
template <typename T>
struct Workspace {
    uint32_t batch = 0, seq = 0;
    ModelConfig cfg_cached{0, 0, 0, 0, 0, 0, 0.0f};
    std::vector<LayerCache<T>> layers;
    Tensor<T> x_final, ln_f_out, logits;
    std::vector<T> mean_f, rstd_f;
    Tensor<T> probs_scratch;                    // evaluation-mode attention scratch
    Tensor<T> g_a, g_b, g_c, g_qkv, g_ff, g_p;  // backward scratch
    Tensor<T> dlogits;

    void ensure(const ModelConfig& cfg, uint32_t batch_size, uint32_t seq_len);
};

// Tensors shaped for cfg, all zero.
template <typename T>
Parameters<T> alloc_params(const ModelConfig& cfg);

// Deterministic scaled-uniform init; layer-norm gains 1, all biases 0. The
// output head starts at zero so an untrained model emits uniform logits.
template <typename T>
Parameters<T> init_params(const ModelConfig& cfg, uint64_t seed);

// Per-position logits over the vocabulary land in ws.logits ((batch*seq) x V).
// training=true caches attention probabilities per layer and applies dropout.
template <typename T>
void forward(const ModelConfig& cfg, const Parameters<T>& params, const uint8_t* tokens,
             uint32_t batch_size, uint32_t seq_len, Workspace<T>& ws, bool training = false,
             uint64_t dropout_seed = 0);

template <typename T>
Tensor<T> forward_logits(const ModelConfig& cfg, const Parameters<T>& params, const Batch& batch);

// Mean cross-entropy over masked positions only, full 4-way vocabulary.
template <typename T>
double loss_from_logits(const Tensor<T>& logits, const Batch& batch);

// Analytic gradient of the masked loss; returns the loss. grads must come
// from alloc_params(cfg) and is overwritten.
template <typename T>
double grad(const ModelConfig& cfg, const Parameters<T>& params, const Batch& batch,
            Parameters<T>& grads, Workspace<T>& ws, bool training = true,
            uint64_t dropout_seed = 0);

struct AdamConfig {
    float lr = 3e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    uint32_t warmup_steps = 0;  // linear ramp to lr; 0 disables
};

struct AdamState {
    Parameters<float> m, v;
    uint64_t step = 0;
};

AdamState make_adam_state(const ModelConfig& cfg);

// One adaptive-moment update on params; deterministic given (state, params,
// batch, seed). Returns the batch loss.
float train_step(const ModelConfig& cfg, Parameters<float>& params, AdamState& state,
                 const AdamConfig& adam, const Batch& batch, Parameters<float>& grad_buf,
                 Workspace<float>& ws, uint64_t dropout_seed = 0);

void save_checkpoint(const ModelConfig& cfg, const Parameters<float>& params,
                     const std::string& path);
std::pair<ModelConfig, Parameters<float>> load_checkpoint(const std::string& path);

inline constexpr uint64_t kParamInitTag = 4;

namespace detail {

template <typename Self, typename F>
void visit_params(Self& p, F&& f) {
    using ecalab::nn::ParamKind;
    f("tok_emb", ParamKind::Embedding, p.tok_emb);
    f("pos_emb", ParamKind::Embedding, p.pos_emb);
    for (size_t l = 0; l < p.layers.size(); ++l) {
        auto& L = p.layers[l];
        const std::string pre = "layer" + std::to_string(l) + ".";
        f(pre + "ln1_gain", ParamKind::Gain, L.ln1_gain);
        f(pre + "ln1_bias", ParamKind::Bias, L.ln1_bias);
        f(pre + "w_qkv", ParamKind::Weight, L.w_qkv);
        f(pre + "b_qkv", ParamKind::Bias, L.b_qkv);
        f(pre + "w_out", ParamKind::Weight, L.w_out);
        f(pre + "b_out", ParamKind::Bias, L.b_out);
        f(pre + "ln2_gain", ParamKind::Gain, L.ln2_gain);
        f(pre + "ln2_bias", ParamKind::Bias, L.ln2_bias);
        f(pre + "w_ff1", ParamKind::Weight, L.w_ff1);
        f(pre + "b_ff1", ParamKind::Bias, L.b_ff1);
        f(pre + "w_ff2", ParamKind::Weight, L.w_ff2);
        f(pre + "b_ff2", ParamKind::Bias, L.b_ff2);
    }
    f("ln_f_gain", ParamKind::Gain, p.ln_f_gain);
    f("ln_f_bias", ParamKind::Bias, p.ln_f_bias);
    f("w_head", ParamKind::HeadWeight, p.w_head);
    f("b_head", ParamKind::Bias, p.b_head);
}

}  // namespace detail

template <typename T>
template <typename F>
void Parameters<T>::for_each(F&& f) {
    detail::visit_params(*this, std::forward<F>(f));
}

template <typename T>
template <typename F>
void Parameters<T>::for_each(F&& f) const {
    detail::visit_params(*this, std::forward<F>(f));
}

template <typename T>
size_t Parameters<T>::count() const {
    size_t n = 0;
    for_each([&](const std::string&, ParamKind, const Tensor<T>& t) { n += t.size(); });
    return n;
}

}  // namespace ecalab::nn
