#pragma once

#include "hexpose/error.hpp"

namespace hexpose::json_util {

template <typename T>
T required(const nlohmann::json& obj, const char* key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key))
    throw FormatError("missing \"" + std::string(key) + "\" in " + std::string(where));
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad \"" + std::string(key) + "\" in " + std::string(where) + ": " + e.what());
  }
}

template <typename T>
T optional(const nlohmann::json& obj, const char* key, T fallback, std::string_view where) {
  if (!obj.contains(key)) return fallback;
  return required<T>(obj, key, where);
}

}  // namespace hexpose::json_util
