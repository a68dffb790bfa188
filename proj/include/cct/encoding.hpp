#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "cct/errors.hpp"

namespace cct {

// ---------------------------------------------------------------------------
// deterministic number formatting
// ---------------------------------------------------------------------------

// Shortest round-trip decimal form, locale-independent. Used everywhere a
// float lands in a text artifact (CSV, SVG, JSON comments) so identical
// inputs give identical bytes.
inline std::string fmt_double(double v) {
    std::array<char, 32> buf;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw NumericError("fmt_double: conversion failed");
    return std::string(buf.data(), end);
}

inline double parse_double(const std::string& s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw DataError("not a number: '" + s + "'");
    }
    return v;
}

// ---------------------------------------------------------------------------
// crc32 (IEEE, reflected)
// ---------------------------------------------------------------------------

namespace detail {

inline const std::array<std::uint32_t, 256>& crc32_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

}  // namespace detail

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    const auto& table = detail::crc32_table();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

inline std::uint32_t crc32(const std::string& s) {
    return crc32(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

inline std::string crc32_hex(std::uint32_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(8, '0');
    for (int i = 7; i >= 0; --i) {
        out[i] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

// ---------------------------------------------------------------------------
// base64
// ---------------------------------------------------------------------------

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < len) chunk |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < len) chunk |= data[i + 2];
        out.push_back(alphabet[(chunk >> 18) & 0x3F]);
        out.push_back(alphabet[(chunk >> 12) & 0x3F]);
        out.push_back(i + 1 < len ? alphabet[(chunk >> 6) & 0x3F] : '=');
        out.push_back(i + 2 < len ? alphabet[chunk & 0x3F] : '=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw DataError("base64: length must be a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = value_of(c);
                if (vals[k] < 0) throw DataError("base64: invalid character");
                if (pad) throw DataError("base64: data after padding");
            }
        }
        const std::uint32_t chunk = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((chunk >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(chunk & 0xFF));
    }
    return out;
}

// ---------------------------------------------------------------------------
// little-endian fp32 packing
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> floats_to_le_bytes(const std::vector<float>& values) {
    std::vector<std::uint8_t> out(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &values[i], 4);
        out[i * 4 + 0] = static_cast<std::uint8_t>(bits & 0xFF);
        out[i * 4 + 1] = static_cast<std::uint8_t>((bits >> 8) & 0xFF);
        out[i * 4 + 2] = static_cast<std::uint8_t>((bits >> 16) & 0xFF);
        out[i * 4 + 3] = static_cast<std::uint8_t>((bits >> 24) & 0xFF);
    }
    return out;
}

inline std::vector<float> le_bytes_to_floats(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 4 != 0) throw DataError("float buffer length not a multiple of 4");
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[i * 4 + 0]) |
                                   (static_cast<std::uint32_t>(bytes[i * 4 + 1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[i * 4 + 2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[i * 4 + 3]) << 24);
        std::memcpy(&out[i], &bits, 4);
    }
    return out;
}

}  // namespace cct
