#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cct/config.hpp"
#include "cct/ops.hpp"
#include "cct/rng.hpp"
#include "cct/tensor.hpp"

namespace cct {

// Named parameter tensors in declaration order.
template <typename T>
class ModelParams {
public:
    void add(const std::string& name, Tensor<T> t) {
        if (by_name_.count(name)) throw UsageError("params: duplicate name '" + name + "'");
        names_.push_back(name);
        by_name_.emplace(name, std::move(t));
    }

    bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

    Tensor<T>& at(const std::string& name) {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) {
            throw UsageError("params: missing '" + name +
                             "' (parameters built from a different config?)");
        }
        return it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        return const_cast<ModelParams*>(this)->at(name);
    }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& name : names_) n += by_name_.at(name).numel();
        return n;
    }

    void set_requires_grad(bool rg) {
        for (const auto& name : names_) at(name).set_requires_grad(rg);
    }

    void zero_grads() {
        for (const auto& name : names_) at(name).zero_grad();
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Tensor<T>> by_name_;
};

// Truncated-normal (sigma 0.02, clipped at 2 sigma) for weights, zeros for
// biases and norm shifts, ones for norm gains. Deterministic under seed.
template <typename T>
ModelParams<T> init_params(const CctConfig& cfg, RngStream& rng) {
    ModelParams<T> params;
    for (const auto& [name, shape] : param_shapes(cfg)) {
        const std::size_t n = shape_numel(shape);
        std::vector<T> values(n);
        const bool is_gamma = name.ends_with(".gamma");
        const bool is_zero = name.ends_with(".bias") || name.ends_with(".beta");
        if (is_gamma) {
            std::fill(values.begin(), values.end(), T(1));
        } else if (is_zero) {
            std::fill(values.begin(), values.end(), T(0));
        } else {
            for (auto& v : values) v = static_cast<T>(rng.truncated_normal(0.02));
        }
        Tensor<T> t(shape, std::move(values), true);
        params.add(name, t);
    }
    return params;
}

// ---------------------------------------------------------------------------
// positional embedding
// ---------------------------------------------------------------------------

// Standard transformer sinusoid over the flattened token index:
// PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(...).
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d) {
    if (d % 2 != 0) {
        throw UsageError("sinusoidal_positions: token dimension must be even, got " +
                         std::to_string(d));
    }
    std::vector<T> out(n * d);
    for (std::size_t pos = 0; pos < n; ++pos) {
        for (std::size_t i = 0; i < d / 2; ++i) {
            const double freq =
                std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            const double angle = static_cast<double>(pos) * freq;
            out[pos * d + 2 * i] = static_cast<T>(std::sin(angle));
            out[pos * d + 2 * i + 1] = static_cast<T>(std::cos(angle));
        }
    }
    return Tensor<T>({n, d}, std::move(out));
}

// ---------------------------------------------------------------------------
// tokenizers
// ---------------------------------------------------------------------------

// Convolutional tokenizer: per stage conv -> ReLU -> maxpool; the final
// feature map flattened spatially, channels become the token dimension.
template <typename T>
Tensor<T> tokenize(const Tensor<T>& images, const ModelParams<T>& params, const CctConfig& cfg) {
    const TokenizerPlan plan = plan_tokenizer(cfg);
    if (images.rank() != 4 || images.extent(1) != cfg.in_channels ||
        images.extent(2) != cfg.image_h || images.extent(3) != cfg.image_w) {
        throw ShapeError("tokenize: images " + shape_str(images.shape()) +
                         " do not match configured input " + std::to_string(cfg.in_channels) +
                         "x" + std::to_string(cfg.image_h) + "x" + std::to_string(cfg.image_w));
    }
    Tensor<T> x = images;
    for (std::size_t s = 0; s < cfg.tokenizer_stages; ++s) {
        const std::string p = "tokenizer.stage" + std::to_string(s);
        x = conv2d(x, params.at(p + ".conv.weight"), params.at(p + ".conv.bias"),
                   cfg.conv_stride, cfg.conv_padding);
        x = relu(x);
        x = maxpool2d(x, cfg.pool_kernel, cfg.pool_stride, cfg.pool_padding);
    }
    const std::size_t n_batch = x.extent(0);
    x = reshape(x, {n_batch, cfg.embed_dim, plan.sequence_length});
    return permute(x, {0, 2, 1});  // [N, n, d]
}

// Patch tokenizer (ViT-style): non-overlapping patches flattened and
// linearly projected.
template <typename T>
Tensor<T> patch_embed(const Tensor<T>& images, const ModelParams<T>& params,
                      const CctConfig& cfg) {
    const std::size_t p = cfg.patch_size;
    if (cfg.image_h % p != 0 || cfg.image_w % p != 0) {
        throw UsageError("patch_embed: image " + std::to_string(cfg.image_h) + "x" +
                         std::to_string(cfg.image_w) + " is not divisible by patch size " +
                         std::to_string(p));
    }
    if (images.rank() != 4 || images.extent(1) != cfg.in_channels ||
        images.extent(2) != cfg.image_h || images.extent(3) != cfg.image_w) {
        throw ShapeError("patch_embed: images " + shape_str(images.shape()) +
                         " do not match the configured input geometry");
    }
    const std::size_t n_batch = images.extent(0);
    const std::size_t c = cfg.in_channels;
    const std::size_t gh = cfg.image_h / p;
    const std::size_t gw = cfg.image_w / p;
    // [N, C, gh, p, gw, p] -> [N, gh, gw, C, p, p] -> [N, n, C*p*p]
    Tensor<T> x = reshape(images, {n_batch, c, gh, p, gw, p});
    x = permute(x, {0, 2, 4, 1, 3, 5});
    x = reshape(x, {n_batch, gh * gw, c * p * p});
    return linear(x, params.at("patch_embed.weight"), params.at("patch_embed.bias"));
}

// ---------------------------------------------------------------------------
// attention and encoder
// ---------------------------------------------------------------------------

// Multi-head self-attention with a fused QKV projection. Optionally writes
// the post-softmax attention weights ([N, h, n, n]) to `attn_probs`.
template <typename T>
Tensor<T> mhsa(const Tensor<T>& tokens, const ModelParams<T>& params, const std::string& prefix,
               const CctConfig& cfg, RngStream& rng, bool training,
               Tensor<T>* attn_probs = nullptr) {
    const std::size_t n_batch = tokens.extent(0);
    const std::size_t n = tokens.extent(1);
    const std::size_t d = tokens.extent(2);
    const std::size_t h = cfg.num_heads;
    if (d % h != 0) throw ConfigError("mhsa: token dim not divisible by head count");
    const std::size_t dh = d / h;

    Tensor<T> qkv = linear(tokens, params.at(prefix + ".qkv.weight"),
                           params.at(prefix + ".qkv.bias"));  // [N, n, 3d]
    auto split_heads = [&](Tensor<T> t) {
        // [N, n, d] -> [N, h, n, dh]
        return permute(reshape(t, {n_batch, n, h, dh}), {0, 2, 1, 3});
    };
    Tensor<T> q = split_heads(narrow(qkv, 2, 0, d));
    Tensor<T> k = split_heads(narrow(qkv, 2, d, d));
    Tensor<T> v = split_heads(narrow(qkv, 2, 2 * d, d));

    Tensor<T> scores = matmul(q, permute(k, {0, 1, 3, 2}));  // [N, h, n, n]
    scores = scale(scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    Tensor<T> probs = softmax(scores, 3);
    if (attn_probs) *attn_probs = probs;
    probs = dropout(probs, cfg.attention_dropout_rate, rng, training);

    Tensor<T> ctx = matmul(probs, v);                   // [N, h, n, dh]
    ctx = permute(ctx, {0, 2, 1, 3});                   // [N, n, h, dh]
    ctx = reshape(ctx, {n_batch, n, d});                // heads amalgamated
    return linear(ctx, params.at(prefix + ".out.weight"), params.at(prefix + ".out.bias"));
}

// Pre-norm residual block: x + MHSA(LN(x)), then + MLP(LN(.)).
// MLP: linear(d -> d*ratio) -> GELU -> dropout -> linear(-> d) -> dropout.
template <typename T>
Tensor<T> encoder_block(const Tensor<T>& tokens, const ModelParams<T>& params,
                        const std::string& prefix, const CctConfig& cfg, RngStream& rng,
                        bool training) {
    Tensor<T> x = tokens;
    {
        Tensor<T> h = layer_norm(x, params.at(prefix + ".ln1.gamma"),
                                 params.at(prefix + ".ln1.beta"));
        h = mhsa(h, params, prefix, cfg, rng, training);
        x = add(x, h);
    }
    {
        Tensor<T> h = layer_norm(x, params.at(prefix + ".ln2.gamma"),
                                 params.at(prefix + ".ln2.beta"));
        h = linear(h, params.at(prefix + ".mlp.fc1.weight"), params.at(prefix + ".mlp.fc1.bias"));
        h = gelu(h, cfg.gelu_tanh);
        h = dropout(h, cfg.dropout_rate, rng, training);
        h = linear(h, params.at(prefix + ".mlp.fc2.weight"), params.at(prefix + ".mlp.fc2.bias"));
        h = dropout(h, cfg.dropout_rate, rng, training);
        x = add(x, h);
    }
    return x;
}

// Attention pooling over the token sequence: w = softmax(tokens . proj)
// along n, output the w-weighted sum of tokens.
template <typename T>
Tensor<T> seq_pool(const Tensor<T>& tokens, const Tensor<T>& proj,
                   Tensor<T>* pool_weights = nullptr) {
    const std::size_t n_batch = tokens.extent(0);
    const std::size_t d = tokens.extent(2);
    Tensor<T> logits = matmul(tokens, proj);     // [N, n, 1]
    Tensor<T> w = softmax(logits, 1);
    if (pool_weights) *pool_weights = w;
    Tensor<T> wt = permute(w, {0, 2, 1});        // [N, 1, n]
    Tensor<T> pooled = matmul(wt, tokens);       // [N, 1, d]
    return reshape(pooled, {n_batch, d});
}

template <typename T>
Tensor<T> seq_pool(const Tensor<T>& tokens, const ModelParams<T>& params) {
    return seq_pool(tokens, params.at("seqpool.attention.weight"));
}

// ---------------------------------------------------------------------------
// full forward pass
// ---------------------------------------------------------------------------

// Encoder + pooling + classifier head over an already-tokenized sequence.
// Shared by all three variants (conv tokenizer, patch+seqpool, patch+class
// token).
template <typename T>
Tensor<T> encode_and_classify(const Tensor<T>& tokens, const ModelParams<T>& params,
                              const CctConfig& cfg, RngStream& rng, bool training) {
    const std::size_t n_batch = tokens.extent(0);
    const std::size_t d = tokens.extent(2);
    Tensor<T> x = tokens;

    if (cfg.pooling == PoolingKind::class_token) {
        Tensor<T> cls = broadcast_to(params.at("class_token"), {n_batch, 1, d});
        x = concat<T>({cls, x}, 1);
    }
    const std::size_t n_total = x.extent(1);

    switch (cfg.positional_embedding) {
        case PositionalKind::sinusoidal:
            x = add(x, sinusoidal_positions<T>(n_total, d));
            break;
        case PositionalKind::learnable:
            x = add(x, params.at("pos_embed"));
            break;
        case PositionalKind::none:
            break;
    }
    x = dropout(x, cfg.dropout_rate, rng, training);

    for (std::size_t b = 0; b < cfg.encoder_depth; ++b) {
        x = encoder_block(x, params, "encoder.block" + std::to_string(b), cfg, rng, training);
    }
    x = layer_norm(x, params.at("final_norm.gamma"), params.at("final_norm.beta"));

    Tensor<T> pooled;
    if (cfg.pooling == PoolingKind::seqpool) {
        pooled = seq_pool(x, params);
    } else {
        pooled = reshape(narrow(x, 1, 0, 1), {n_batch, d});
    }
    return linear(pooled, params.at("head.weight"), params.at("head.bias"));
}

// images [N, C, H, W] -> logits [N, num_classes].
template <typename T>
Tensor<T> forward(const Tensor<T>& images, const ModelParams<T>& params, const CctConfig& cfg,
                  RngStream& rng, bool training) {
    Tensor<T> tokens = cfg.tokenizer == TokenizerKind::convolutional
                           ? tokenize(images, params, cfg)
                           : patch_embed(images, params, cfg);
    return encode_and_classify(tokens, params, cfg, rng, training);
}

}  // namespace cct
