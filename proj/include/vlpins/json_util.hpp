#pragma once

#include <string>

#include <json.hpp>

#include "vlpins/attitude.hpp"
#include "vlpins/errors.hpp"

namespace vlpins::json_util {

inline nlohmann::json toJson(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + ": expected a 3-element array");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json toJson(const Mat3& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

inline Mat3 mat3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + ": expected 3x3 row array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3(j.at(r), what).transpose();
  return m;
}

template <typename T>
T valueOr(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace vlpins::json_util
