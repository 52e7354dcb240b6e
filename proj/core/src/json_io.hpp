#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "decenergy/errors.hpp"
#include "decenergy/trace.hpp"

namespace decenergy::detail {

using nlohmann::json;

inline std::string at_line(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line) + ": ";
}

inline json parse_json_line(std::string_view source, std::size_t line, const std::string& text) {
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        throw ValidationError(at_line(source, line) + "malformed JSON object");
    }
    if (!value.is_object()) {
        throw ValidationError(at_line(source, line) + "expected a JSON object");
    }
    return value;
}

// Enforces the field contract of one object: every expected key present,
// no unknown keys in strict mode. Lenient mode records a warning per unknown
// field instead.
inline void check_fields(const json& object, std::initializer_list<std::string_view> expected,
                         std::string_view source, std::size_t line, const ParseOptions& options,
                         std::vector<std::string>* warnings) {
    for (std::string_view key : expected) {
        if (!object.contains(key)) {
            throw ValidationError(at_line(source, line) + "missing field '" + std::string(key) + "'");
        }
    }
    for (const auto& [key, value] : object.items()) {
        bool known = false;
        for (std::string_view candidate : expected) {
            if (key == candidate) {
                known = true;
                break;
            }
        }
        if (known) continue;
        if (!options.lenient) {
            throw ValidationError(at_line(source, line) + "unknown field '" + key +
                                  "' (pass --lenient to ignore)");
        }
        if (warnings != nullptr) {
            warnings->push_back(at_line(source, line) + "ignoring unknown field '" + key + "'");
        }
    }
}

[[noreturn]] inline void bad_field_type(std::string_view source, std::size_t line,
                                        std::string_view key, std::string_view want) {
    throw ValidationError(at_line(source, line) + "field '" + std::string(key) + "' must be " +
                          std::string(want));
}

inline std::int64_t get_int(const json& object, std::string_view key, std::string_view source,
                            std::size_t line) {
    const auto& value = object.at(std::string(key));
    if (!value.is_number_integer()) bad_field_type(source, line, key, "an integer");
    return value.get<std::int64_t>();
}

inline bool get_bool(const json& object, std::string_view key, std::string_view source,
                     std::size_t line) {
    const auto& value = object.at(std::string(key));
    if (!value.is_boolean()) bad_field_type(source, line, key, "a boolean");
    return value.get<bool>();
}

inline double get_double(const json& object, std::string_view key, std::string_view source,
                         std::size_t line) {
    const auto& value = object.at(std::string(key));
    if (!value.is_number()) bad_field_type(source, line, key, "a number");
    return value.get<double>();
}

inline std::string get_string(const json& object, std::string_view key, std::string_view source,
                              std::size_t line) {
    const auto& value = object.at(std::string(key));
    if (!value.is_string()) bad_field_type(source, line, key, "a string");
    return value.get<std::string>();
}

}  // namespace decenergy::detail
