#pragma once

#include <yaml-cpp/yaml.h>

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "rangekit/core/error.hpp"

namespace rangekit::definition::detail {

inline std::string where(const YAML::Node& node) {
    auto mark = node.Mark();
    if (mark.is_null()) return {};
    return " at line " + std::to_string(mark.line + 1) + ", column " +
           std::to_string(mark.column + 1);
}

[[noreturn]] inline void shape_error(const YAML::Node& node, const std::string& message) {
    auto mark = node.Mark();
    if (mark.is_null()) throw ParseError(message, 0, 0);
    throw ParseError(message + where(node), mark.line + 1, mark.column + 1);
}

inline YAML::Node load_yaml(std::string_view document) {
    try {
        return YAML::Load(std::string(document));
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg + " at line " + std::to_string(e.mark.line + 1) + ", column " +
                             std::to_string(e.mark.column + 1),
                         e.mark.line + 1, e.mark.column + 1);
    }
}

inline void expect_map(const YAML::Node& node, std::string_view what) {
    if (!node.IsMap()) shape_error(node, std::string(what) + " must be a mapping");
}

inline YAML::Node require(const YAML::Node& map, const char* key, std::string_view context) {
    auto child = map[key];
    if (!child) {
        throw Error(ErrorCode::MissingField, std::string(context) + ": missing required key '" +
                                                 key + "'" + where(map));
    }
    return child;
}

inline std::string scalar(const YAML::Node& node, std::string_view context) {
    if (!node.IsScalar()) shape_error(node, std::string(context) + " must be a scalar");
    return node.Scalar();
}

inline std::string require_scalar(const YAML::Node& map, const char* key,
                                  std::string_view context) {
    return scalar(require(map, key, context), std::string(context) + "." + key);
}

inline bool as_bool(const YAML::Node& node, std::string_view context) {
    bool value = false;
    if (!node.IsScalar() || !YAML::convert<bool>::decode(node, value)) {
        shape_error(node, std::string(context) + " must be a boolean");
    }
    return value;
}

/// Sequence-valued key; absent or null counts as empty.
inline std::vector<YAML::Node> sequence(const YAML::Node& map, const char* key,
                                        std::string_view context) {
    std::vector<YAML::Node> items;
    auto child = map[key];
    if (!child || child.IsNull()) return items;
    if (!child.IsSequence()) shape_error(child, std::string(context) + "." + key + " must be a list");
    for (const auto& item : child) items.push_back(item);
    return items;
}

inline void warn_unknown(const YAML::Node& map, std::initializer_list<std::string_view> known,
                         std::string_view context, std::vector<std::string>& warnings) {
    for (const auto& kv : map) {
        auto key = kv.first.as<std::string>();
        bool found = false;
        for (auto k : known) found = found || key == k;
        if (!found) {
            warnings.push_back(std::string(context) + ": unknown key '" + key + "' ignored" +
                               where(kv.first));
        }
    }
}

}  // namespace rangekit::definition::detail
