#pragma once

// Typed field access for nlohmann::json documents. Every failure is reported
// as ParseError carrying the dotted path of the offending field.

#include <nlohmann/json.hpp>
#include <string>

#include "corridor_gym/errors.hpp"

namespace cgym::detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
T get_as(const json& value, const std::string& path) {
  try {
    if constexpr (std::is_floating_point_v<T>) {
      if (!value.is_number()) throw ParseError(path + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ParseError(path + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ParseError(path + ": expected an integer");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!value.is_string()) throw ParseError(path + ": expected a string");
    }
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& path) {
  return get_as<T>(require(obj, key, path), path + "." + key);
}

inline const json& array_field(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw ParseError(path + "." + key + ": expected an array");
  return v;
}

inline json parse_document(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.what() carries "at line L, column C".
    throw ParseError(what + ": " + e.what());
  }
}

}  // namespace cgym::detail
