#include <fstream>
#include <ostream>

#include "graspkit/cloud_io.hpp"
#include "graspkit/planner.hpp"
#include "json_util.hpp"

namespace graspkit {
namespace {

using detail::Json;
using detail::read_field;

RrtConfig read_rrt(const Json& j) {
  detail::check_keys(j, {"step", "goal_bias", "rewire_radius", "max_samples", "time_budget_ms",
                         "goal_tolerance", "collision_check_resolution", "fingertip_radius",
                         "clearance", "rng_seed", "workspace", "max_trajectories"});
  RrtConfig c;
  c.step = read_field(j, "step", c.step);
  c.goal_bias = read_field(j, "goal_bias", c.goal_bias);
  c.rewire_radius = read_field(j, "rewire_radius", c.rewire_radius);
  c.max_samples = read_field(j, "max_samples", c.max_samples);
  c.time_budget_ms = read_field(j, "time_budget_ms", c.time_budget_ms);
  c.goal_tolerance = read_field(j, "goal_tolerance", c.goal_tolerance);
  c.collision_check_resolution = read_field(j, "collision_check_resolution", c.collision_check_resolution);
  c.fingertip_radius = read_field(j, "fingertip_radius", c.fingertip_radius);
  c.clearance = read_field(j, "clearance", c.clearance);
  c.rng_seed = read_field(j, "rng_seed", c.rng_seed);
  c.workspace = detail::read_aabb(j, "workspace", c.workspace);
  c.max_trajectories = read_field(j, "max_trajectories", c.max_trajectories);
  c.validate();
  return c;
}

PlannerWeights read_weights(const Json& j) {
  detail::check_keys(j, {"alpha", "beta", "gamma"});
  PlannerWeights w;
  w.alpha = read_field(j, "alpha", w.alpha);
  w.beta = read_field(j, "beta", w.beta);
  w.gamma = read_field(j, "gamma", w.gamma);
  w.validate();
  return w;
}

}  // namespace

IkSettings detail::read_ik_settings(const Json& j) {
  detail::check_keys(j, {"w_theta", "lambda", "max_iters", "pos_tol", "ang_tol", "step_scale", "max_step"});
  IkSettings s;
  s.w_theta = read_field(j, "w_theta", s.w_theta);
  s.lambda = read_field(j, "lambda", s.lambda);
  s.max_iters = read_field(j, "max_iters", s.max_iters);
  s.pos_tol = read_field(j, "pos_tol", s.pos_tol);
  s.ang_tol = read_field(j, "ang_tol", s.ang_tol);
  s.step_scale = read_field(j, "step_scale", s.step_scale);
  s.max_step = read_field(j, "max_step", s.max_step);
  s.validate();
  return s;
}

Json detail::ik_settings_to_json(const IkSettings& s) {
  return {{"w_theta", s.w_theta}, {"lambda", s.lambda},         {"max_iters", s.max_iters},
          {"pos_tol", s.pos_tol}, {"ang_tol", s.ang_tol},       {"step_scale", s.step_scale},
          {"max_step", s.max_step}};
}

PlannerConfig detail::planner_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::kParseError, "planner config must be an object");
  detail::check_keys(j, {"schema_version", "rrt", "weights", "ik", "min_sep", "max_resample",
                         "max_seed_attempts"});
  PlannerConfig c;
  const Json empty = Json::object();
  c.rrt = read_rrt(j.contains("rrt") ? j.at("rrt") : empty);
  c.weights = read_weights(j.contains("weights") ? j.at("weights") : empty);
  c.ik = detail::read_ik_settings(j.contains("ik") ? j.at("ik") : empty);
  c.min_sep = read_field(j, "min_sep", c.min_sep);
  c.max_resample = read_field(j, "max_resample", c.max_resample);
  c.max_seed_attempts = read_field(j, "max_seed_attempts", c.max_seed_attempts);
  if (!(c.min_sep >= 0)) throw Error(Errc::kValidationError, "min_sep must be >= 0");
  if (c.max_resample < 0) throw Error(Errc::kValidationError, "max_resample must be >= 0");
  if (c.max_seed_attempts < 1) throw Error(Errc::kValidationError, "max_seed_attempts must be >= 1");
  return c;
}

PlannerConfig read_planner_config(std::istream& in) {
  return detail::build_from_text(detail::read_text(in), [](const Json& j) {
    detail::check_schema(j);
    return detail::planner_config_from_json(j);
  });
}

PlannerConfig load_planner_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  return read_planner_config(in);
}

Json detail::planner_config_to_json(const PlannerConfig& c) {
  Json j;
  j["rrt"] = {{"step", c.rrt.step},
              {"goal_bias", c.rrt.goal_bias},
              {"rewire_radius", c.rrt.rewire_radius},
              {"max_samples", c.rrt.max_samples},
              {"time_budget_ms", c.rrt.time_budget_ms},
              {"goal_tolerance", c.rrt.goal_tolerance},
              {"collision_check_resolution", c.rrt.collision_check_resolution},
              {"fingertip_radius", c.rrt.fingertip_radius},
              {"clearance", c.rrt.clearance},
              {"rng_seed", c.rrt.rng_seed},
              {"workspace", detail::to_json(c.rrt.workspace)},
              {"max_trajectories", c.rrt.max_trajectories}};
  j["weights"] = {{"alpha", c.weights.alpha}, {"beta", c.weights.beta}, {"gamma", c.weights.gamma}};
  j["ik"] = detail::ik_settings_to_json(c.ik);
  j["min_sep"] = c.min_sep;
  j["max_resample"] = c.max_resample;
  j["max_seed_attempts"] = c.max_seed_attempts;
  return j;
}

void write_planner_config(std::ostream& out, const PlannerConfig& c) {
  Json j = detail::planner_config_to_json(c);
  j["schema_version"] = detail::kSchemaVersion;
  out << j.dump(2) << '\n';
}

void write_trajectories_csv(std::ostream& out, const std::vector<FingerTrajectory>& trajectories) {
  out << "finger_id,waypoint_index,x,y,z\n";
  for (const auto& t : trajectories) {
    for (std::size_t i = 0; i < t.waypoints.size(); ++i) {
      const auto& p = t.waypoints[i];
      out << t.finger_id << ',' << i << ',' << format_double(p.x()) << ',' << format_double(p.y())
          << ',' << format_double(p.z()) << '\n';
    }
  }
}

void write_trajectories_ply(std::ostream& out, const std::vector<FingerTrajectory>& trajectories) {
  std::size_t vertices = 0, edges = 0;
  for (const auto& t : trajectories) {
    vertices += t.waypoints.size();
    if (!t.waypoints.empty()) edges += t.waypoints.size() - 1;
  }
  out << "ply\nformat ascii 1.0\ncomment fingertip trajectories (palm frame)\n"
      << "element vertex " << vertices << "\nproperty double x\nproperty double y\n"
      << "property double z\nproperty int finger_id\n"
      << "element edge " << edges << "\nproperty int vertex1\nproperty int vertex2\nend_header\n";
  for (const auto& t : trajectories) {
    for (const auto& p : t.waypoints) {
      out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z())
          << ' ' << t.finger_id << '\n';
    }
  }
  std::size_t base = 0;
  for (const auto& t : trajectories) {
    for (std::size_t i = 1; i < t.waypoints.size(); ++i) {
      out << base + i - 1 << ' ' << base + i << '\n';
    }
    base += t.waypoints.size();
  }
}

}  // namespace graspkit
