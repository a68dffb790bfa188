#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cct/errors.hpp"
#include "cct/ops.hpp"

namespace cct {

enum class PositionalKind { sinusoidal, learnable, none };
enum class PoolingKind { seqpool, class_token };
enum class TokenizerKind { convolutional, patch };

inline const char* to_string(PositionalKind k) {
    switch (k) {
        case PositionalKind::sinusoidal: return "sinusoidal";
        case PositionalKind::learnable: return "learnable";
        default: return "none";
    }
}
inline const char* to_string(PoolingKind k) {
    return k == PoolingKind::seqpool ? "seqpool" : "class_token";
}
inline const char* to_string(TokenizerKind k) {
    return k == TokenizerKind::convolutional ? "convolutional" : "patch";
}

inline PositionalKind positional_from_string(const std::string& s) {
    if (s == "sinusoidal") return PositionalKind::sinusoidal;
    if (s == "learnable") return PositionalKind::learnable;
    if (s == "none") return PositionalKind::none;
    throw ConfigError("unknown positional_embedding '" + s + "'");
}
inline PoolingKind pooling_from_string(const std::string& s) {
    if (s == "seqpool") return PoolingKind::seqpool;
    if (s == "class_token") return PoolingKind::class_token;
    throw ConfigError("unknown pooling '" + s + "'");
}
inline TokenizerKind tokenizer_from_string(const std::string& s) {
    if (s == "convolutional") return TokenizerKind::convolutional;
    if (s == "patch") return TokenizerKind::patch;
    throw ConfigError("unknown tokenizer '" + s + "'");
}

// Full model hyperparameter set. Fields the published table leaves open
// (encoder depth, MLP ratio, dropout rates, stem width) carry the defaults
// documented in the README and are all configurable.
struct CctConfig {
    std::size_t image_h = 256;
    std::size_t image_w = 256;
    std::size_t in_channels = 1;

    std::size_t tokenizer_stages = 4;
    std::size_t conv_kernel = 5;
    std::size_t conv_stride = 2;
    std::size_t conv_padding = 1;
    std::size_t pool_kernel = 5;
    std::size_t pool_stride = 2;
    std::size_t pool_padding = 1;
    std::size_t stem_channels = 0;  // 0: derive from embed_dim (doubling schedule)

    std::size_t embed_dim = 512;
    std::size_t num_heads = 8;
    std::size_t encoder_depth = 2;
    std::size_t mlp_ratio = 2;
    double dropout_rate = 0.1;
    double attention_dropout_rate = 0.1;
    std::size_t num_classes = 2;

    PositionalKind positional_embedding = PositionalKind::sinusoidal;
    PoolingKind pooling = PoolingKind::seqpool;
    TokenizerKind tokenizer = TokenizerKind::convolutional;
    std::size_t patch_size = 16;  // used only when tokenizer == patch
    bool gelu_tanh = false;

    void validate() const {
        if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads != 0) {
            throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                              " must be divisible by num_heads " + std::to_string(num_heads));
        }
        if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
        if (image_h == 0 || image_w == 0) throw ConfigError("image size must be positive");
        if (in_channels != 1 && in_channels != 3) {
            throw ConfigError("in_channels must be 1 or 3, got " + std::to_string(in_channels));
        }
        if (encoder_depth == 0) throw ConfigError("encoder_depth must be at least 1");
        if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be at least 1");
        if (dropout_rate < 0 || dropout_rate >= 1 || attention_dropout_rate < 0 ||
            attention_dropout_rate >= 1) {
            throw ConfigError("dropout rates must lie in [0, 1)");
        }
        if (tokenizer == TokenizerKind::convolutional && tokenizer_stages == 0) {
            throw ConfigError("tokenizer_stages must be at least 1");
        }
        if (tokenizer == TokenizerKind::patch && patch_size == 0) {
            throw ConfigError("patch_size must be positive");
        }
    }
};

// Field-by-field traversal in a fixed order; serializers (checkpoint
// key/value section, run-config JSON) share this single inventory.
template <typename Cfg, typename V>
void visit_config(Cfg& cfg, V&& v) {
    v("image_h", cfg.image_h);
    v("image_w", cfg.image_w);
    v("in_channels", cfg.in_channels);
    v("tokenizer_stages", cfg.tokenizer_stages);
    v("conv_kernel", cfg.conv_kernel);
    v("conv_stride", cfg.conv_stride);
    v("conv_padding", cfg.conv_padding);
    v("pool_kernel", cfg.pool_kernel);
    v("pool_stride", cfg.pool_stride);
    v("pool_padding", cfg.pool_padding);
    v("stem_channels", cfg.stem_channels);
    v("embed_dim", cfg.embed_dim);
    v("num_heads", cfg.num_heads);
    v("encoder_depth", cfg.encoder_depth);
    v("mlp_ratio", cfg.mlp_ratio);
    v("dropout_rate", cfg.dropout_rate);
    v("attention_dropout_rate", cfg.attention_dropout_rate);
    v("num_classes", cfg.num_classes);
    v("positional_embedding", cfg.positional_embedding);
    v("pooling", cfg.pooling);
    v("tokenizer", cfg.tokenizer);
    v("patch_size", cfg.patch_size);
    v("gelu_tanh", cfg.gelu_tanh);
}

// ---------------------------------------------------------------------------
// tokenizer geometry
// ---------------------------------------------------------------------------

struct TokenizerStage {
    std::size_t in_h, in_w;
    std::size_t conv_h, conv_w;
    std::size_t pool_h, pool_w;
    std::size_t in_channels, out_channels;
};

struct TokenizerPlan {
    std::vector<TokenizerStage> stages;  // empty for the patch tokenizer
    std::size_t sequence_length = 0;
    std::size_t token_dim = 0;
};

// Channel schedule: stem doubling up to embed_dim at the final stage. The
// derived stem is embed_dim / 2^(stages-1), clamped below at 16.
inline std::vector<std::size_t> tokenizer_channels(const CctConfig& cfg) {
    const std::size_t stages = cfg.tokenizer_stages;
    std::vector<std::size_t> ch(stages);
    for (std::size_t i = 0; i + 1 < stages; ++i) {
        std::size_t c;
        if (cfg.stem_channels > 0) {
            c = cfg.stem_channels << i;
        } else {
            c = cfg.embed_dim >> (stages - 1 - i);
            if (c < 16) c = 16;
        }
        ch[i] = c;
    }
    ch[stages - 1] = cfg.embed_dim;
    return ch;
}

// Applies the conv-then-pool spatial recurrence per stage. Throws a
// GeometryError naming the first stage whose extent collapses.
inline TokenizerPlan plan_tokenizer(const CctConfig& cfg) {
    cfg.validate();
    TokenizerPlan plan;
    plan.token_dim = cfg.embed_dim;

    if (cfg.tokenizer == TokenizerKind::patch) {
        if (cfg.image_h % cfg.patch_size != 0 || cfg.image_w % cfg.patch_size != 0) {
            throw UsageError("patch tokenizer: image " + std::to_string(cfg.image_h) + "x" +
                             std::to_string(cfg.image_w) + " is not divisible by patch size " +
                             std::to_string(cfg.patch_size));
        }
        plan.sequence_length = (cfg.image_h / cfg.patch_size) * (cfg.image_w / cfg.patch_size);
        return plan;
    }

    const auto channels = tokenizer_channels(cfg);
    std::size_t h = cfg.image_h, w = cfg.image_w;
    std::size_t in_ch = cfg.in_channels;
    for (std::size_t s = 0; s < cfg.tokenizer_stages; ++s) {
        TokenizerStage st{};
        st.in_h = h;
        st.in_w = w;
        st.in_channels = in_ch;
        st.out_channels = channels[s];
        try {
            st.conv_h = detail::conv_out_extent(h, cfg.conv_kernel, cfg.conv_stride,
                                                cfg.conv_padding, "conv", "height");
            st.conv_w = detail::conv_out_extent(w, cfg.conv_kernel, cfg.conv_stride,
                                                cfg.conv_padding, "conv", "width");
            st.pool_h = detail::conv_out_extent(st.conv_h, cfg.pool_kernel, cfg.pool_stride,
                                                cfg.pool_padding, "pool", "height");
            st.pool_w = detail::conv_out_extent(st.conv_w, cfg.pool_kernel, cfg.pool_stride,
                                                cfg.pool_padding, "pool", "width");
        } catch (const GeometryError& e) {
            throw GeometryError("tokenizer stage " + std::to_string(s + 1) + ": " + e.what());
        }
        plan.stages.push_back(st);
        h = st.pool_h;
        w = st.pool_w;
        in_ch = st.out_channels;
    }
    plan.sequence_length = h * w;
    return plan;
}

// Token count entering the encoder, including the class token when present.
inline std::size_t encoder_tokens(const CctConfig& cfg) {
    std::size_t n = plan_tokenizer(cfg).sequence_length;
    if (cfg.pooling == PoolingKind::class_token) n += 1;
    return n;
}

// ---------------------------------------------------------------------------
// parameter inventory
// ---------------------------------------------------------------------------

// Every parameter tensor, in declaration order. Shapes are a pure function
// of the config; checkpoints and init both derive from this list.
inline std::vector<std::pair<std::string, Shape>> param_shapes(const CctConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<std::string, Shape>> out;
    const std::size_t d = cfg.embed_dim;

    if (cfg.tokenizer == TokenizerKind::convolutional) {
        const auto channels = tokenizer_channels(cfg);
        std::size_t in_ch = cfg.in_channels;
        for (std::size_t s = 0; s < cfg.tokenizer_stages; ++s) {
            const std::string p = "tokenizer.stage" + std::to_string(s);
            out.push_back({p + ".conv.weight",
                           Shape{channels[s], in_ch, cfg.conv_kernel, cfg.conv_kernel}});
            out.push_back({p + ".conv.bias", Shape{channels[s]}});
            in_ch = channels[s];
        }
    } else {
        const std::size_t patch_dim = cfg.in_channels * cfg.patch_size * cfg.patch_size;
        out.push_back({"patch_embed.weight", Shape{patch_dim, d}});
        out.push_back({"patch_embed.bias", Shape{d}});
    }

    if (cfg.pooling == PoolingKind::class_token) {
        out.push_back({"class_token", Shape{1, 1, d}});
    }
    if (cfg.positional_embedding == PositionalKind::learnable) {
        out.push_back({"pos_embed", Shape{encoder_tokens(cfg), d}});
    }

    for (std::size_t b = 0; b < cfg.encoder_depth; ++b) {
        const std::string p = "encoder.block" + std::to_string(b);
        out.push_back({p + ".ln1.gamma", Shape{d}});
        out.push_back({p + ".ln1.beta", Shape{d}});
        out.push_back({p + ".qkv.weight", Shape{d, 3 * d}});
        out.push_back({p + ".qkv.bias", Shape{3 * d}});
        out.push_back({p + ".out.weight", Shape{d, d}});
        out.push_back({p + ".out.bias", Shape{d}});
        out.push_back({p + ".ln2.gamma", Shape{d}});
        out.push_back({p + ".ln2.beta", Shape{d}});
        out.push_back({p + ".mlp.fc1.weight", Shape{d, cfg.mlp_ratio * d}});
        out.push_back({p + ".mlp.fc1.bias", Shape{cfg.mlp_ratio * d}});
        out.push_back({p + ".mlp.fc2.weight", Shape{cfg.mlp_ratio * d, d}});
        out.push_back({p + ".mlp.fc2.bias", Shape{d}});
    }

    out.push_back({"final_norm.gamma", Shape{d}});
    out.push_back({"final_norm.beta", Shape{d}});
    if (cfg.pooling == PoolingKind::seqpool) {
        out.push_back({"seqpool.attention.weight", Shape{d, 1}});
    }
    out.push_back({"head.weight", Shape{d, cfg.num_classes}});
    out.push_back({"head.bias", Shape{cfg.num_classes}});
    return out;
}

inline std::size_t count_params(const CctConfig& cfg) {
    std::size_t total = 0;
    for (const auto& [name, shape] : param_shapes(cfg)) total += shape_numel(shape);
    return total;
}

// ---------------------------------------------------------------------------
// shipped presets
// ---------------------------------------------------------------------------

// The published hyperparameter table read literally: conv stride 2 AND pool
// stride 2 over 4 stages at 256x256. Geometrically infeasible (stage 4
// pools a 1x1 map with kernel 5); kept so the planner can demonstrate the
// diagnostic.
inline CctConfig preset_table5_literal() { return CctConfig{}; }

// Same settings with the stage count dropped to 3; final map 3x3, 9 tokens.
inline CctConfig preset_table5_literal_3stage() {
    CctConfig cfg;
    cfg.tokenizer_stages = 3;
    return cfg;
}

// Stride-1 tokenizer convolutions (the upstream compact-transformer
// convention), 4 stages; final map 13x13, 169 tokens.
inline CctConfig preset_table5_compat() {
    CctConfig cfg;
    cfg.conv_stride = 1;
    return cfg;
}

// Small config for the synthetic smoke task: 32x32 inputs, one tokenizer
// stage, d=8, 2 heads, 1 block.
inline CctConfig preset_tiny_test() {
    CctConfig cfg;
    cfg.image_h = cfg.image_w = 32;
    cfg.in_channels = 1;
    cfg.tokenizer_stages = 1;
    cfg.embed_dim = 8;
    cfg.num_heads = 2;
    cfg.encoder_depth = 1;
    cfg.mlp_ratio = 2;
    cfg.dropout_rate = 0.0;
    cfg.attention_dropout_rate = 0.0;
    return cfg;
}

inline CctConfig preset_by_name(const std::string& name) {
    if (name == "table5-literal") return preset_table5_literal();
    if (name == "table5-literal-3stage") return preset_table5_literal_3stage();
    if (name == "table5-compat") return preset_table5_compat();
    if (name == "tiny-test") return preset_tiny_test();
    throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace cct
