#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cct/config.hpp"
#include "cct/encoding.hpp"
#include "cct/model.hpp"

namespace cct {

// Checkpoint layout (text): a manifest with the config as key/value lines
// and the parameter inventory, then one base64 line per buffer holding the
// values as little-endian fp32 with a crc32. Buffers appear in declaration
// order.
//
//   CCT-CHECKPOINT
//   format_version = 1
//   [config]
//   ...
//   [params]
//   name = extents...
//   header_crc = xxxxxxxx
//   [buffers]
//   name base64 crc32
//   [end]

inline constexpr int kCheckpointVersion = 1;

namespace detail {

struct KvWriter {
    std::ostringstream& out;
    void operator()(const char* name, std::size_t v) { out << name << " = " << v << "\n"; }
    void operator()(const char* name, double v) { out << name << " = " << fmt_double(v) << "\n"; }
    void operator()(const char* name, bool v) { out << name << " = " << (v ? 1 : 0) << "\n"; }
    void operator()(const char* name, PositionalKind v) { out << name << " = " << to_string(v) << "\n"; }
    void operator()(const char* name, PoolingKind v) { out << name << " = " << to_string(v) << "\n"; }
    void operator()(const char* name, TokenizerKind v) { out << name << " = " << to_string(v) << "\n"; }
};

struct KvReader {
    const std::map<std::string, std::string>& kv;
    std::string context;

    const std::string& get(const char* name) const {
        auto it = kv.find(name);
        if (it == kv.end()) throw IntegrityError(context + ": missing config key '" + name + "'");
        return it->second;
    }
    void operator()(const char* name, std::size_t& v) const {
        v = static_cast<std::size_t>(std::stoull(get(name)));
    }
    void operator()(const char* name, double& v) const { v = parse_double(get(name)); }
    void operator()(const char* name, bool& v) const { v = get(name) != "0"; }
    void operator()(const char* name, PositionalKind& v) const {
        v = positional_from_string(get(name));
    }
    void operator()(const char* name, PoolingKind& v) const { v = pooling_from_string(get(name)); }
    void operator()(const char* name, TokenizerKind& v) const {
        v = tokenizer_from_string(get(name));
    }
};

}  // namespace detail

inline std::string config_to_kv(const CctConfig& cfg) {
    std::ostringstream out;
    detail::KvWriter w{out};
    visit_config(cfg, w);
    return out.str();
}

inline CctConfig config_from_kv(const std::map<std::string, std::string>& kv,
                                const std::string& context) {
    CctConfig cfg;
    detail::KvReader r{kv, context};
    visit_config(cfg, r);
    return cfg;
}

template <typename T>
void save_checkpoint(const ModelParams<T>& params, const CctConfig& cfg,
                     const std::string& path, const std::string& run_note = "") {
    const auto shapes = param_shapes(cfg);
    std::ostringstream header;
    header << "CCT-CHECKPOINT\n";
    header << "format_version = " << kCheckpointVersion << "\n";
    if (!run_note.empty()) header << "run = " << run_note << "\n";
    header << "[config]\n" << config_to_kv(cfg);
    header << "[params]\n";
    for (const auto& [name, shape] : shapes) {
        header << name << " =";
        for (auto e : shape) header << ' ' << e;
        header << "\n";
    }
    std::ostringstream out;
    out << header.str();
    out << "header_crc = " << crc32_hex(crc32(header.str())) << "\n";
    out << "[buffers]\n";
    for (const auto& [name, shape] : shapes) {
        const auto& t = params.at(name);
        std::vector<float> f32(t.values().begin(), t.values().end());
        const auto bytes = floats_to_le_bytes(f32);
        out << name << ' ' << base64_encode(bytes.data(), bytes.size()) << ' '
            << crc32_hex(crc32(bytes.data(), bytes.size())) << "\n";
    }
    out << "[end]\n";

    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write checkpoint: " + path);
    file << out.str();
    if (!file) throw DataError("failed while writing checkpoint: " + path);
}

template <typename T>
std::pair<ModelParams<T>, CctConfig> load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open checkpoint: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(file, line)) lines.push_back(line);

    std::size_t i = 0;
    auto need_line = [&](const char* what) -> const std::string& {
        if (i >= lines.size()) {
            throw IntegrityError(path + ": truncated checkpoint, expected " + std::string(what));
        }
        return lines[i];
    };
    if (need_line("magic") != "CCT-CHECKPOINT") {
        throw IntegrityError(path + ": not a checkpoint file");
    }
    ++i;
    {
        const std::string& v = need_line("format_version");
        const std::string prefix = "format_version = ";
        if (v.rfind(prefix, 0) != 0) throw IntegrityError(path + ": missing format_version");
        const int version = std::stoi(v.substr(prefix.size()));
        if (version != kCheckpointVersion) {
            throw IntegrityError(path + ": unsupported format_version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
        }
        ++i;
    }
    if (need_line("run note or [config]").rfind("run = ", 0) == 0) ++i;
    if (need_line("[config]") != "[config]") throw IntegrityError(path + ": missing [config]");
    ++i;

    std::map<std::string, std::string> kv;
    while (need_line("config entries") != "[params]") {
        const std::string& l = lines[i];
        const auto eq = l.find(" = ");
        if (eq == std::string::npos) throw IntegrityError(path + ": malformed config line");
        kv[l.substr(0, eq)] = l.substr(eq + 3);
        ++i;
    }
    ++i;  // [params]

    std::vector<std::pair<std::string, Shape>> declared;
    while (need_line("param shapes").rfind("header_crc = ", 0) != 0) {
        const std::string& l = lines[i];
        const auto eq = l.find(" =");
        if (eq == std::string::npos) throw IntegrityError(path + ": malformed param line");
        Shape shape;
        std::istringstream ss(l.substr(eq + 2));
        std::size_t e;
        while (ss >> e) shape.push_back(e);
        declared.push_back({l.substr(0, eq), shape});
        ++i;
    }
    {
        // recompute the header checksum over everything before header_crc
        std::ostringstream header;
        for (std::size_t k = 0; k < i; ++k) header << lines[k] << "\n";
        const std::string expect = "header_crc = " + crc32_hex(crc32(header.str()));
        if (lines[i] != expect) throw IntegrityError(path + ": header checksum mismatch");
        ++i;
    }
    if (need_line("[buffers]") != "[buffers]") throw IntegrityError(path + ": missing [buffers]");
    ++i;

    CctConfig cfg = config_from_kv(kv, path);
    const auto expected = param_shapes(cfg);
    if (declared != expected) {
        throw IntegrityError(path + ": parameter inventory does not match the embedded config");
    }

    ModelParams<T> params;
    for (const auto& [name, shape] : expected) {
        const std::string& l = need_line("buffer");
        if (l == "[end]") throw IntegrityError(path + ": truncated, missing buffer for " + name);
        std::istringstream ss(l);
        std::string got_name, b64, crc;
        ss >> got_name >> b64 >> crc;
        if (got_name != name) {
            throw IntegrityError(path + ": expected buffer '" + name + "', found '" + got_name +
                                 "'");
        }
        const auto bytes = base64_decode(b64);
        if (crc32_hex(crc32(bytes.data(), bytes.size())) != crc) {
            throw IntegrityError(path + ": checksum mismatch in buffer '" + name + "'");
        }
        const auto f32 = le_bytes_to_floats(bytes);
        if (f32.size() != shape_numel(shape)) {
            throw IntegrityError(path + ": buffer '" + name + "' holds " +
                                 std::to_string(f32.size()) + " values, shape wants " +
                                 std::to_string(shape_numel(shape)));
        }
        std::vector<T> values(f32.begin(), f32.end());
        params.add(name, Tensor<T>(shape, std::move(values), true));
        ++i;
    }
    if (need_line("[end]") != "[end]") throw IntegrityError(path + ": missing [end] marker");
    return {std::move(params), cfg};
}

}  // namespace cct
