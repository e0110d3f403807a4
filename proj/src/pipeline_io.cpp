#include <fstream>
#include <ostream>

#include "graspkit/cloud_io.hpp"
#include "graspkit/pipeline.hpp"
#include "json_util.hpp"

namespace graspkit {
namespace {

using detail::Json;
using detail::read_field;

Json pose_to_json(const RigidTransform& t) {
  const auto a = t.to_row_major();
  return Json(std::vector<double>(a.begin(), a.end()));
}

RigidTransform read_pose(const Json& j, const char* key, const RigidTransform& fallback) {
  if (!j.contains(key)) return fallback;
  const auto a = detail::read_array<12>(j, key);
  return RigidTransform::from_row_major(a);
}

ObjectShape read_object(const Json& j) {
  if (!j.is_object()) throw Error(Errc::kParseError, "field 'object' must be an object");
  detail::check_keys(j, {"type", "radius", "height", "size"});
  ObjectShape o;
  o.kind = object_kind_from_string(detail::require_field<std::string>(j, "type"));
  if (o.kind == ObjectKind::kCylinder) {
    if (j.contains("size")) throw Error(Errc::kValidationError, "size applies to blocks only");
    o.radius = read_field(j, "radius", o.radius);
    o.height = read_field(j, "height", o.height);
  } else {
    if (j.contains("radius") || j.contains("height")) {
      throw Error(Errc::kValidationError, "radius and height apply to cylinders only");
    }
    o.size = detail::read_vec3(j, "size", o.size);
  }
  return o;
}

Json object_to_json(const ObjectShape& o) {
  Json j{{"type", std::string(to_string(o.kind))}};
  if (o.kind == ObjectKind::kCylinder) {
    j["radius"] = o.radius;
    j["height"] = o.height;
  } else {
    j["size"] = detail::to_json(o.size);
  }
  return j;
}

SceneConfig scene_config_from_json(const Json& j) {
  detail::check_schema(j);
  detail::check_keys(j, {"schema_version", "object", "pose", "camera", "camera_position", "camera_samples",
                         "noise_sigma", "outlier_fraction", "plane", "plane_half_extent", "rng_seed"});
  if (!j.contains("object")) throw Error(Errc::kParseError, "missing field 'object'");
  const ObjectShape object = read_object(j.at("object"));
  const std::string camera = read_field<std::string>(j, "camera", "front");
  const bool custom = camera == "custom";
  const CameraPreset preset = custom ? CameraPreset::kFront : camera_preset_from_string(camera);

  // Unset fields take the preset values for this object.
  SceneConfig c = SceneConfig::preset(object.kind, preset, 1);
  c.object = object;
  c.object_pose = read_pose(j, "pose", c.object_pose);
  c.camera = camera;
  if (custom) {
    if (!j.contains("camera_position")) {
      throw Error(Errc::kValidationError, "camera_position is required for camera \"custom\"");
    }
    c.camera_position = detail::read_vec3(j, "camera_position");
  } else if (j.contains("camera_position")) {
    throw Error(Errc::kValidationError, "camera_position needs camera \"custom\"");
  }
  c.camera_samples = read_field(j, "camera_samples", c.camera_samples);
  c.noise_sigma = read_field(j, "noise_sigma", c.noise_sigma);
  c.outlier_fraction = read_field(j, "outlier_fraction", c.outlier_fraction);
  c.plane = read_field(j, "plane", c.plane);
  c.plane_half_extent = read_field(j, "plane_half_extent", c.plane_half_extent);
  c.rng_seed = read_field(j, "rng_seed", c.rng_seed);
  c.validate();
  return c;
}

PreprocessConfig read_preprocess(const Json& j, const PreprocessConfig& base) {
  if (!j.is_object()) throw Error(Errc::kParseError, "field 'preprocess' must be an object");
  detail::check_keys(j, {"outlier_k", "outlier_stddev", "plane_distance_threshold", "plane_iterations",
                         "plane_min_inlier_fraction", "remove_plane", "crop_box", "rng_seed"});
  PreprocessConfig p = base;
  p.outlier_k = read_field(j, "outlier_k", p.outlier_k);
  p.outlier_stddev = read_field(j, "outlier_stddev", p.outlier_stddev);
  p.plane_distance_threshold = read_field(j, "plane_distance_threshold", p.plane_distance_threshold);
  p.plane_iterations = read_field(j, "plane_iterations", p.plane_iterations);
  p.plane_min_inlier_fraction = read_field(j, "plane_min_inlier_fraction", p.plane_min_inlier_fraction);
  p.remove_plane = read_field(j, "remove_plane", p.remove_plane);
  p.crop_box = detail::read_aabb(j, "crop_box", p.crop_box);
  p.rng_seed = read_field(j, "rng_seed", p.rng_seed);
  p.validate();
  return p;
}

Json preprocess_to_json(const PreprocessConfig& p) {
  return {{"outlier_k", p.outlier_k},
          {"outlier_stddev", p.outlier_stddev},
          {"plane_distance_threshold", p.plane_distance_threshold},
          {"plane_iterations", p.plane_iterations},
          {"plane_min_inlier_fraction", p.plane_min_inlier_fraction},
          {"remove_plane", p.remove_plane},
          {"crop_box", detail::to_json(p.crop_box)},
          {"rng_seed", p.rng_seed}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  detail::check_schema(j);
  detail::check_keys(j, {"schema_version", "preprocess", "planner", "region_radius", "min_object_points",
                         "smooth_k", "normal_k", "extent_trim", "snap_to_support", "seed_offsets", "q_open", "contact_tolerance",
                         "penetration_tolerance", "c_thresh", "raw_dt", "dt", "relaxed_replan", "threads"});
  PipelineConfig c;
  if (j.contains("preprocess")) c.preprocess = read_preprocess(j.at("preprocess"), c.preprocess);
  if (j.contains("planner")) {
    // Planner defaults differ from a bare PlannerConfig only in the IK damping.
    Json pj = j.at("planner");
    if (pj.is_object() && !(pj.contains("ik") && pj.at("ik").contains("lambda"))) {
      pj["ik"]["lambda"] = c.planner.ik.lambda;
    }
    c.planner = detail::planner_config_from_json(pj);
  }
  c.region_radius = read_field(j, "region_radius", c.region_radius);
  c.min_object_points = read_field(j, "min_object_points", c.min_object_points);
  c.smooth_k = read_field(j, "smooth_k", c.smooth_k);
  c.normal_k = read_field(j, "normal_k", c.normal_k);
  c.extent_trim = read_field(j, "extent_trim", c.extent_trim);
  c.snap_to_support = read_field(j, "snap_to_support", c.snap_to_support);
  c.seed_offsets = read_field(j, "seed_offsets", c.seed_offsets);
  c.q_open = read_field(j, "q_open", c.q_open);
  c.contact_tolerance = read_field(j, "contact_tolerance", c.contact_tolerance);
  c.penetration_tolerance = read_field(j, "penetration_tolerance", c.penetration_tolerance);
  c.c_thresh = read_field(j, "c_thresh", c.c_thresh);
  c.raw_dt = read_field(j, "raw_dt", c.raw_dt);
  c.dt = read_field(j, "dt", c.dt);
  c.relaxed_replan = read_field(j, "relaxed_replan", c.relaxed_replan);
  c.threads = read_field(j, "threads", c.threads);
  c.validate();
  return c;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

SceneConfig read_scene_config(std::istream& in) {
  return detail::build_from_text(detail::read_text(in), scene_config_from_json);
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  return read_scene_config(in);
}

namespace {

Json scene_config_to_json(const SceneConfig& c) {
  Json j{{"object", object_to_json(c.object)},
         {"pose", pose_to_json(c.object_pose)},
         {"camera", c.camera}};
  if (c.camera == "custom") j["camera_position"] = detail::to_json(c.camera_position);
  j["camera_samples"] = c.camera_samples;
  j["noise_sigma"] = c.noise_sigma;
  j["outlier_fraction"] = c.outlier_fraction;
  j["plane"] = c.plane;
  j["plane_half_extent"] = c.plane_half_extent;
  j["rng_seed"] = c.rng_seed;
  return j;
}

Json pipeline_config_to_json(const PipelineConfig& c);

BenchConfig bench_config_from_json(const Json& j) {
  detail::check_schema(j);
  detail::check_keys(j, {"schema_version", "trials", "workers", "base_seed", "scenes", "pipeline"});
  BenchConfig b;
  b.trials = read_field(j, "trials", b.trials);
  b.workers = read_field(j, "workers", b.workers);
  const auto base = read_field<std::uint64_t>(j, "base_seed", 1);
  if (j.contains("scenes")) {
    if (j.contains("base_seed")) throw Error(Errc::kValidationError, "base_seed applies only without scenes");
    const Json& list = j.at("scenes");
    if (!list.is_array() || list.empty()) throw Error(Errc::kValidationError, "scenes must be a non-empty array");
    b.scenes.clear();
    for (const auto& sj : list) b.scenes.push_back(scene_config_from_json(sj));
  } else {
    b.scenes = acceptance_scenes(base);
  }
  if (j.contains("pipeline")) b.pipeline = pipeline_config_from_json(j.at("pipeline"));
  if (b.trials < 1) throw Error(Errc::kValidationError, "trials must be >= 1");
  if (b.workers < 0) throw Error(Errc::kValidationError, "workers must be >= 0");
  return b;
}

}  // namespace

void write_scene_config(std::ostream& out, const SceneConfig& c) {
  Json j = scene_config_to_json(c);
  j["schema_version"] = detail::kSchemaVersion;
  out << j.dump(2) << '\n';
}

PipelineConfig read_pipeline_config(std::istream& in) {
  return detail::build_from_text(detail::read_text(in), pipeline_config_from_json);
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  return read_pipeline_config(in);
}

namespace {

Json pipeline_config_to_json(const PipelineConfig& c) {
  return {{"preprocess", preprocess_to_json(c.preprocess)},
         {"planner", detail::planner_config_to_json(c.planner)},
         {"region_radius", c.region_radius},
         {"min_object_points", c.min_object_points},
         {"smooth_k", c.smooth_k},
         {"normal_k", c.normal_k},
         {"extent_trim", c.extent_trim},
         {"snap_to_support", c.snap_to_support},
         {"seed_offsets", c.seed_offsets},
         {"q_open", c.q_open},
         {"contact_tolerance", c.contact_tolerance},
         {"penetration_tolerance", c.penetration_tolerance},
         {"c_thresh", c.c_thresh},
         {"raw_dt", c.raw_dt},
         {"dt", c.dt},
         {"relaxed_replan", c.relaxed_replan},
         {"threads", c.threads}};
}

}  // namespace

void write_pipeline_config(std::ostream& out, const PipelineConfig& c) {
  Json j = pipeline_config_to_json(c);
  j["schema_version"] = detail::kSchemaVersion;
  out << j.dump(2) << '\n';
}

BenchConfig read_bench_config(std::istream& in) {
  return detail::build_from_text(detail::read_text(in), bench_config_from_json);
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kParseError, "cannot open " + path.string());
  return read_bench_config(in);
}

void write_bench_config(std::ostream& out, const BenchConfig& b) {
  Json scenes = Json::array();
  for (const auto& s : b.scenes) scenes.push_back(scene_config_to_json(s));
  Json j{{"schema_version", detail::kSchemaVersion},
         {"trials", b.trials},
         {"workers", b.workers},
         {"scenes", std::move(scenes)},
         {"pipeline", pipeline_config_to_json(b.pipeline)}};
  out << j.dump(2) << '\n';
}

void write_truth_json(std::ostream& out, const SceneTruth& truth, const Scene& scene) {
  std::size_t counts[3] = {0, 0, 0};
  for (auto l : scene.cloud.labels) {
    if (l >= 0 && l < 3) ++counts[l];
  }
  Json j{{"schema_version", detail::kSchemaVersion},
         {"object", object_to_json(truth.object)},
         {"pose", pose_to_json(truth.object_pose)},
         {"aabb", detail::to_json(truth.aabb)},
         {"centroid", detail::to_json(truth.centroid)},
         {"plane_z", truth.plane_z ? Json(*truth.plane_z) : Json(nullptr)},
         {"camera_position", detail::to_json(scene.camera_position)},
         {"palm_from_camera", pose_to_json(scene.palm_from_camera)},
         {"points", {{"total", scene.cloud.size()},
                     {"object", counts[0]},
                     {"plane", counts[1]},
                     {"outlier", counts[2]}}}};
  out << j.dump(2) << '\n';
}

void write_result_json(std::ostream& out, const PipelineResult& r, bool include_timing) {
  Json fingers = Json::array();
  for (const auto& f : r.hypothesis.fingers) {
    Json fj{{"finger_id", f.finger_id},
            {"status", std::string(to_string(f.status))},
            {"seed_rank", f.seed_rank},
            {"seed", {{"t", detail::to_json(f.seed.t)}, {"approach", detail::to_json(f.seed.approach)}}},
            {"contact", detail::to_json(f.contact)},
            {"score", f.endpoint.score},
            {"converged", f.converged},
            {"ik_residual", {{"pos", f.ik.residual.pos}, {"ang", f.ik.residual.ang}}}};
    if (f.ik.q.size() > 0) fj["q"] = std::vector<double>(f.ik.q.data(), f.ik.q.data() + f.ik.q.size());
    if (!f.detail.empty()) fj["detail"] = f.detail;
    fingers.push_back(std::move(fj));
  }
  Json j{{"schema_version", detail::kSchemaVersion},
         {"segmentation_accuracy", r.segmentation_accuracy},
         {"grasp_success", r.grasp_success},
         {"feasible", r.feasible},
         {"contact_gaps", r.contact_gaps},
         {"tactile_confirmed", r.tactile_confirmed},
         {"eta_empty", r.eta_empty},
         {"pose_estimation_error", r.pose_estimation_error},
         {"object_aabb", detail::to_json(r.object_aabb)},
         {"points", {{"cloud", r.cloud_points}, {"kept", r.kept_points}, {"object", r.object_points}}},
         {"relaxations", r.relaxations},
         {"failure_reason", r.failure_reason ? Json(*r.failure_reason) : Json(nullptr)},
         {"aggregate_score", r.hypothesis.aggregate_score},
         {"fingers", std::move(fingers)}};
  if (include_timing) {
    j["times_ms"] = {{"preprocess", r.times.preprocess_ms},   {"segmentation", r.times.segmentation_ms},
                     {"perception", r.times.perception_ms},   {"planning", r.times.planning_ms},
                     {"ik", r.times.ik_ms},                   {"trajectory", r.times.trajectory_ms},
                     {"end_to_end", r.times.end_to_end_ms}};
  }
  out << j.dump(2) << '\n';
}

void write_joint_trajectories_csv(std::ostream& out, const std::vector<JointTrajectory>& trajs) {
  out << "finger_id,sample_index,t,joint_index,q\n";
  for (const auto& tr : trajs) {
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
      const auto& s = tr.samples[i];
      for (Eigen::Index k = 0; k < s.q.size(); ++k) {
        out << tr.finger_id << ',' << i << ',' << format_double(s.t) << ',' << k << ','
            << format_double(s.q[k]) << '\n';
      }
    }
  }
}

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials) {
  out << "object,camera,trial,seed,sa,success,feasible,pose_error_mm,eta_empty,planning_ms,ik_ms,"
         "end_to_end_ms,failure\n";
  for (const auto& t : trials) {
    const auto& r = t.result;
    out << t.object << ',' << t.camera << ',' << t.trial << ',' << t.seed << ','
        << format_double(r.segmentation_accuracy) << ',' << (r.grasp_success ? 1 : 0) << ','
        << (r.feasible ? 1 : 0) << ',' << format_double(r.pose_estimation_error * 1e3) << ','
        << format_double(r.eta_empty) << ',' << format_double(r.times.planning_ms) << ','
        << format_double(r.times.ik_ms) << ',' << format_double(r.times.end_to_end_ms) << ','
        << csv_field(r.failure_reason.value_or("")) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "object,camera,trials,sa,gsr,mean_planning_ms,max_planning_ms,mean_ik_ms,pose_error_mm\n";
  for (const auto& r : rows) {
    out << r.object << ',' << r.camera << ',' << r.trials << ',' << format_double(r.mean_sa) << ','
        << format_double(r.gsr) << ',' << format_double(r.mean_planning_ms) << ','
        << format_double(r.max_planning_ms) << ',' << format_double(r.mean_ik_ms) << ','
        << format_double(r.mean_pose_error_mm) << '\n';
  }
}

}  // namespace graspkit
