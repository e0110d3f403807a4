#pragma once

#include <algorithm>
#include <array>
#include <initializer_list>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "graspkit/error.hpp"
#include "graspkit/geometry.hpp"

namespace graspkit::detail {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline Json parse_json(std::istream& in) {
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::kParseError, e.what());
  }
}

/// 1-based line of the first occurrence of "key" in `text`, or 0.
inline int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

/// Parses `text` and runs `build` on the document. Validation messages that
/// start with a field name get the line of that field prefixed.
template <typename F>
auto build_from_text(const std::string& text, F&& build) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::kParseError, e.what());
  }
  try {
    return build(j);
  } catch (const Error& e) {
    const std::string& msg = e.detail();
    // The field is the first quoted name, else the leading word.
    std::string field;
    if (const auto q = msg.find('\''); q != std::string::npos) {
      field = msg.substr(q + 1, msg.find('\'', q + 1) - q - 1);
    } else {
      field = msg.substr(0, msg.find(' '));
    }
    if (const auto dot = field.rfind('.'); dot != std::string::npos) field = field.substr(dot + 1);
    const int line = field.empty() ? 0 : line_of_key(text, field);
    if (line == 0) throw;
    throw Error(e.code(), "line " + std::to_string(line) + ": " + msg);
  }
}

inline std::string read_text(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Rejects keys outside `allowed`.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(Errc::kValidationError, "unknown field '" + key + "'");
  }
}

inline Json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  return parse_json(in);
}

/// Missing schema_version is accepted; a different version is not.
inline void check_schema(const Json& j) {
  if (!j.is_object()) throw Error(Errc::kParseError, "expected a JSON object");
  if (auto it = j.find("schema_version"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
      throw Error(Errc::kValidationError,
                  "schema_version must be " + std::to_string(kSchemaVersion));
    }
  }
}

template <typename T>
T read_field(const Json& j, const char* key, const T& fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw Error(Errc::kParseError, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T require_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(Errc::kParseError, std::string("missing field '") + key + "'");
  return read_field<T>(j, key, T{});
}

template <std::size_t N>
std::array<double, N> read_array(const Json& j, const char* key) {
  const auto v = require_field<std::vector<double>>(j, key);
  if (v.size() != N) {
    throw Error(Errc::kParseError, std::string("field '") + key + "' needs " + std::to_string(N) +
                                       " numbers, got " + std::to_string(v.size()));
  }
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

inline Vec3 read_vec3(const Json& j, const char* key) {
  const auto a = read_array<3>(j, key);
  return {a[0], a[1], a[2]};
}

inline Vec3 read_vec3(const Json& j, const char* key, const Vec3& fallback) {
  return j.contains(key) ? read_vec3(j, key) : fallback;
}

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Aabb read_aabb(const Json& j, const char* key, const Aabb& fallback) {
  if (!j.contains(key)) return fallback;
  const Json& b = j.at(key);
  if (!b.is_object()) throw Error(Errc::kParseError, std::string("field '") + key + "' must be an object");
  const Aabb box{read_vec3(b, "min"), read_vec3(b, "max")};
  if (!box.valid()) throw Error(Errc::kValidationError, std::string("box '") + key + "' needs min <= max");
  return box;
}

inline Json to_json(const Aabb& b) { return Json{{"min", to_json(b.min)}, {"max", to_json(b.max)}}; }

}  // namespace graspkit::detail

namespace graspkit {
struct IkSettings;
struct PlannerConfig;
namespace detail {
IkSettings read_ik_settings(const Json& j);
Json ik_settings_to_json(const IkSettings& s);
PlannerConfig planner_config_from_json(const Json& j);
Json planner_config_to_json(const PlannerConfig& c);
}  // namespace detail
}  // namespace graspkit
