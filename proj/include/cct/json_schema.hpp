#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cct/errors.hpp"

namespace cct {

// Minimal structural validator for the schema subset this project ships:
// type, properties, required, additionalProperties (bool), items, enum.
namespace detail {

inline bool type_matches(const nlohmann::json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
    if (type == "number") return value.is_number();
    if (type == "null") return value.is_null();
    return false;
}

inline void validate_json_rec(const nlohmann::json& schema, const nlohmann::json& value,
                              const std::string& at, std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const std::string type = schema["type"].get<std::string>();
        if (!type_matches(value, type)) {
            errors.push_back(at + ": expected " + type + ", got " +
                             std::string(value.type_name()));
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& option : schema["enum"]) ok = ok || option == value;
        if (!ok) errors.push_back(at + ": value not in enum");
    }
    if (value.is_object()) {
        const auto& props = schema.contains("properties") ? schema["properties"]
                                                          : nlohmann::json::object();
        if (schema.contains("required")) {
            for (const auto& name : schema["required"]) {
                if (!value.contains(name.get<std::string>())) {
                    errors.push_back(at + ": missing required key '" + name.get<std::string>() +
                                     "'");
                }
            }
        }
        const bool extra_ok = !schema.contains("additionalProperties") ||
                              schema["additionalProperties"].get<bool>();
        for (const auto& [key, sub] : value.items()) {
            if (props.contains(key)) {
                validate_json_rec(props[key], sub, at + "/" + key, errors);
            } else if (!extra_ok) {
                errors.push_back(at + ": unexpected key '" + key + "'");
            }
        }
    }
    if (value.is_array() && schema.contains("items")) {
        std::size_t i = 0;
        for (const auto& item : value) {
            validate_json_rec(schema["items"], item, at + "[" + std::to_string(i++) + "]",
                              errors);
        }
    }
}

}  // namespace detail

inline std::vector<std::string> validate_json(const nlohmann::json& schema,
                                              const nlohmann::json& value) {
    std::vector<std::string> errors;
    detail::validate_json_rec(schema, value, "$", errors);
    return errors;
}

inline void validate_json_or_throw(const nlohmann::json& schema, const nlohmann::json& value,
                                   const std::string& what) {
    auto errors = validate_json(schema, value);
    if (!errors.empty()) {
        std::string msg = what + " failed schema validation:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw DataError(msg);
    }
}

}  // namespace cct
