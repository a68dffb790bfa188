#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cct/config.hpp"
#include "cct/trainer.hpp"

namespace cct {

struct DataConfig {
    std::string train_manifest;
    std::string test_manifest;
    std::size_t channels = 0;  // 0: follow model.in_channels
    std::string normalization = "scale01";
    bool verify_files = true;
};

// The single JSON run-configuration document: three objects, every field
// defaulted except the manifest paths, unknown keys rejected.
struct RunConfigFile {
    CctConfig model;
    TrainConfig train;
    DataConfig data;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

inline CctConfig model_from_json(const nlohmann::json& obj) {
    static const std::set<std::string> known = {
        "image_size",      "in_channels",  "tokenizer_stages", "conv_kernel",
        "conv_stride",     "conv_padding", "pool_kernel",      "pool_stride",
        "pool_padding",    "stem_channels", "embed_dim",       "num_heads",
        "encoder_depth",   "mlp_ratio",    "dropout_rate",     "attention_dropout_rate",
        "num_classes",     "positional_embedding", "pooling",  "tokenizer",
        "patch_size",      "gelu"};
    reject_unknown_keys(obj, known, "model");
    CctConfig cfg;
    if (obj.contains("image_size")) {
        const auto& size = obj.at("image_size");
        if (!size.is_array() || size.size() != 2) {
            throw ConfigError("model.image_size must be [height, width]");
        }
        cfg.image_h = size[0].get<std::size_t>();
        cfg.image_w = size[1].get<std::size_t>();
    }
    read_field(obj, "in_channels", cfg.in_channels);
    read_field(obj, "tokenizer_stages", cfg.tokenizer_stages);
    read_field(obj, "conv_kernel", cfg.conv_kernel);
    read_field(obj, "conv_stride", cfg.conv_stride);
    read_field(obj, "conv_padding", cfg.conv_padding);
    read_field(obj, "pool_kernel", cfg.pool_kernel);
    read_field(obj, "pool_stride", cfg.pool_stride);
    read_field(obj, "pool_padding", cfg.pool_padding);
    read_field(obj, "stem_channels", cfg.stem_channels);
    read_field(obj, "embed_dim", cfg.embed_dim);
    read_field(obj, "num_heads", cfg.num_heads);
    read_field(obj, "encoder_depth", cfg.encoder_depth);
    read_field(obj, "mlp_ratio", cfg.mlp_ratio);
    read_field(obj, "dropout_rate", cfg.dropout_rate);
    read_field(obj, "attention_dropout_rate", cfg.attention_dropout_rate);
    read_field(obj, "num_classes", cfg.num_classes);
    if (obj.contains("positional_embedding")) {
        cfg.positional_embedding = positional_from_string(obj.at("positional_embedding"));
    }
    if (obj.contains("pooling")) cfg.pooling = pooling_from_string(obj.at("pooling"));
    if (obj.contains("tokenizer")) cfg.tokenizer = tokenizer_from_string(obj.at("tokenizer"));
    read_field(obj, "patch_size", cfg.patch_size);
    if (obj.contains("gelu")) {
        const std::string g = obj.at("gelu").get<std::string>();
        if (g != "erf" && g != "tanh") throw ConfigError("model.gelu must be 'erf' or 'tanh'");
        cfg.gelu_tanh = g == "tanh";
    }
    return cfg;
}

inline TrainConfig train_from_json(const nlohmann::json& obj) {
    static const std::set<std::string> known = {
        "optimizer", "learning_rate", "weight_decay", "momentum",     "batch_size",
        "epochs",    "seed",          "patience",     "warmup_steps", "precision"};
    reject_unknown_keys(obj, known, "train");
    TrainConfig cfg;
    read_field(obj, "optimizer", cfg.optimizer);
    read_field(obj, "learning_rate", cfg.learning_rate);
    read_field(obj, "weight_decay", cfg.weight_decay);
    read_field(obj, "momentum", cfg.momentum);
    read_field(obj, "batch_size", cfg.batch_size);
    read_field(obj, "epochs", cfg.epochs);
    read_field(obj, "seed", cfg.seed);
    read_field(obj, "patience", cfg.patience);
    read_field(obj, "warmup_steps", cfg.warmup_steps);
    read_field(obj, "precision", cfg.precision);
    return cfg;
}

inline DataConfig data_from_json(const nlohmann::json& obj) {
    static const std::set<std::string> known = {"train_manifest", "test_manifest", "channels",
                                                "normalization", "verify_files"};
    reject_unknown_keys(obj, known, "data");
    DataConfig cfg;
    read_field(obj, "train_manifest", cfg.train_manifest);
    read_field(obj, "test_manifest", cfg.test_manifest);
    read_field(obj, "channels", cfg.channels);
    read_field(obj, "normalization", cfg.normalization);
    read_field(obj, "verify_files", cfg.verify_files);
    if (cfg.normalization != "scale01") {
        throw ConfigError("data.normalization: only 'scale01' is supported");
    }
    return cfg;
}

}  // namespace detail

inline RunConfigFile run_config_from_json_text(const std::string& text,
                                               const std::string& origin = "config") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");
    detail::reject_unknown_keys(j, {"model", "train", "data"}, origin);

    RunConfigFile cfg;
    if (j.contains("model")) cfg.model = detail::model_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = detail::train_from_json(j.at("train"));
    if (j.contains("data")) cfg.data = detail::data_from_json(j.at("data"));
    if (cfg.data.channels == 0) cfg.data.channels = cfg.model.in_channels;
    if (cfg.data.channels != cfg.model.in_channels) {
        throw ConfigError("data.channels disagrees with model.in_channels");
    }
    cfg.model.validate();
    return cfg;
}

inline RunConfigFile load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return run_config_from_json_text(ss.str(), path);
}

}  // namespace cct
