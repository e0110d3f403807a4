#include <fstream>
#include <ostream>

#include "graspkit/kinematics.hpp"
#include "json_util.hpp"

namespace graspkit {
namespace {

using detail::Json;

RigidTransform read_transform(const Json& j, const char* key) {
  const auto a = detail::read_array<12>(j, key);
  return RigidTransform::from_row_major(a);
}

Json to_json(const RigidTransform& t) {
  const auto a = t.to_row_major();
  return Json(std::vector<double>(a.begin(), a.end()));
}

}  // namespace

HandModel read_hand_model(std::istream& in) {
  return detail::build_from_text(detail::read_text(in), [](const Json& j) {
  detail::check_schema(j);
  HandModel hand;
  hand.name = detail::read_field<std::string>(j, "name", "hand");
  hand.actuated_dof = detail::read_field<int>(j, "actuated_dof", 0);
  const Json& fingers = j.contains("fingers") ? j.at("fingers") : Json::array();
  if (!fingers.is_array()) throw Error(Errc::kParseError, "'fingers' must be an array");
  for (const Json& fj : fingers) {
    FingerChain f;
    f.name = detail::read_field<std::string>(fj, "name", "finger" + std::to_string(hand.fingers.size()));
    const Json& joints = fj.contains("joints") ? fj.at("joints") : Json::array();
    if (!joints.is_array()) throw Error(Errc::kParseError, "'joints' must be an array");
    for (const Json& jj : joints) {
      Joint jt;
      jt.parent_offset = read_transform(jj, "offset");
      jt.axis = detail::read_vec3(jj, "axis");
      const auto lim = detail::read_array<2>(jj, "limits");
      jt.q_lo = lim[0];
      jt.q_hi = lim[1];
      jt.velocity_limit = detail::require_field<double>(jj, "vel_limit");
      f.joints.push_back(jt);
    }
    f.tip_offset = read_transform(fj, "tip_offset");
    hand.fingers.push_back(std::move(f));
  }
  hand.validate();
  return hand;
  });
}

HandModel load_hand_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  return read_hand_model(in);
}

void write_hand_model(std::ostream& out, const HandModel& hand) {
  Json j;
  j["schema_version"] = detail::kSchemaVersion;
  j["name"] = hand.name;
  j["actuated_dof"] = hand.actuated_dof;
  j["fingers"] = Json::array();
  for (const auto& f : hand.fingers) {
    Json fj;
    fj["name"] = f.name;
    fj["joints"] = Json::array();
    for (const auto& jt : f.joints) {
      fj["joints"].push_back(Json{{"offset", to_json(jt.parent_offset)},
                                  {"axis", detail::to_json(jt.axis)},
                                  {"limits", {jt.q_lo, jt.q_hi}},
                                  {"vel_limit", jt.velocity_limit}});
    }
    fj["tip_offset"] = to_json(f.tip_offset);
    j["fingers"].push_back(std::move(fj));
  }
  out << j.dump(2) << '\n';
}

IkSettings read_ik_settings(std::istream& in) {
  return detail::build_from_text(detail::read_text(in), [](const detail::Json& j) {
    detail::check_schema(j);
    detail::Json body = j;
    body.erase("schema_version");
    return detail::read_ik_settings(body);
  });
}

IkSettings load_ik_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  return read_ik_settings(in);
}

void write_ik_settings(std::ostream& out, const IkSettings& s) {
  detail::Json j = detail::ik_settings_to_json(s);
  j["schema_version"] = detail::kSchemaVersion;
  out << j.dump(2) << '\n';
}

}  // namespace graspkit
