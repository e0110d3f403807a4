#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graspkit/geometry.hpp"
#include "graspkit/kinematics.hpp"
#include "graspkit/perception.hpp"
#include "graspkit/planner.hpp"

namespace graspkit {

// --- scenes ------------------------------------------------------------------

enum class ObjectKind { kCylinder, kBlock };

/// Object in its local frame: the cylinder axis is local z, both shapes are
/// centred on the local origin.
struct ObjectShape {
  ObjectKind kind = ObjectKind::kCylinder;
  double radius = 0.055;                // cylinder
  double height = 0.12;                 // cylinder
  Vec3 size = Vec3(0.11, 0.13, 0.11);  // block edge lengths

  /// Signed distance in the local frame (negative inside).
  double signed_distance(const Point3& local) const;
  /// Outward unit normal of the closest surface feature.
  Vec3 normal(const Point3& local) const;
  /// First entry of the ray into the solid, as a distance along the unit
  /// direction; nullopt on a miss.
  std::optional<double> ray_entry(const Point3& origin, const Vec3& unit_dir) const;
  Aabb local_bounds() const;
  double surface_area() const;
  double volume() const;
};

std::string_view to_string(ObjectKind k);
ObjectKind object_kind_from_string(std::string_view s);

/// Named camera placements in the palm frame.
enum class CameraPreset { kFront, kWrist, kTop, kExperimental };
std::string_view to_string(CameraPreset p);
CameraPreset camera_preset_from_string(std::string_view s);
Point3 camera_preset_position(CameraPreset p);

struct SceneConfig {
  ObjectShape object;
  RigidTransform object_pose;    // local -> palm
  std::string camera = "front";  // preset name or "custom"
  Point3 camera_position = camera_preset_position(CameraPreset::kFront);
  int camera_samples = 12000;    // object surface samples before visibility
  double noise_sigma = 0.002;    // m, per coordinate
  double outlier_fraction = 0.01;
  bool plane = true;
  double plane_half_extent = 0.15;  // table patch around the object, m
  std::uint64_t rng_seed = 1;

  /// Cylinder (axis along palm y) or block resting on a table at z = -0.145.
  static SceneConfig preset(ObjectKind kind, CameraPreset camera, std::uint64_t seed);
  void validate() const;
};

struct SceneTruth {
  ObjectShape object;
  RigidTransform object_pose;
  Aabb aabb;                  // palm frame
  Point3 centroid;            // palm frame
  std::optional<double> plane_z;

  /// Signed distance from a palm-frame point to the object surface.
  double signed_distance(const Point3& palm) const;
};

struct Scene {
  PointCloud cloud;            // camera frame, labelled per point
  RigidTransform palm_from_camera;
  Point3 camera_position;      // palm frame
  SceneTruth truth;
};

/// Samples the object surface (area-uniform), keeps samples whose camera ray
/// meets no earlier object surface, adds the table plane (also ray-cast
/// against the object), Gaussian noise and uniform outliers. The returned cloud
/// is expressed in the camera frame. Throws kInvalidScene when the camera is
/// inside or on the object.
Scene synthesize_scene(const SceneConfig& cfg);

// --- trajectories and contact ---------------------------------------------

struct JointSample {
  double t = 0.0;
  JointConfig q;
};

struct JointTrajectory {
  int finger_id = 0;
  std::vector<JointSample> samples;
};

/// Natural cubic spline through the samples, resampled every `dt` seconds
/// (the last sample kept exactly), then each output segment is stretched until
/// every |dq/dt| <= velocity_limits. Fewer than two samples: returned as is.
JointTrajectory smooth_and_clip(const JointTrajectory& raw, const Eigen::VectorXd& velocity_limits,
                                double dt);

struct TactileSample {
  int finger_id = 0;
  double c = 0.0;
  double t = 0.0;
};

/// max(0, 1 - d / contact_tolerance) with d the (non-negative) gap between
/// fingertip sphere and surface.
double simulated_tactile(double gap, double contact_tolerance);

/// Per finger in [0, num_fingers): confirmed iff some sample has c >= c_thresh.
std::vector<bool> verify_contact(const std::vector<TactileSample>& samples, double c_thresh,
                                 std::size_t num_fingers);

// --- pipeline -------------------------------------------------------------

struct PipelineConfig {
  PreprocessConfig preprocess;
  double region_radius = 0.01;       // region-growing edge length, m
  std::size_t min_object_points = 50;
  int smooth_k = 16;                 // 0 disables point smoothing
  int normal_k = 16;
  // Per-axis fraction trimmed from each end of the segmented cloud for the
  // object box (seeds, pose). 0 keeps the raw extrema.
  double extent_trim = 0.001;
  // Extend the box down to a level removed plane lying at most
  // 2 * plane_distance_threshold below the segment.
  bool snap_to_support = true;
  PlannerConfig planner;
  std::vector<double> seed_offsets{0.0, 0.005, -0.005, 0.01};  // along palm z, m
  std::vector<double> q_open{0.0, 0.3, 0.1, 0.1};  // start posture of every digit
  double contact_tolerance = 0.005;
  double penetration_tolerance = 0.002;
  double c_thresh = 0.5;
  double raw_dt = 0.1;               // s between planned configurations
  double dt = 0.02;                  // s, resampling step
  bool relaxed_replan = true;
  int threads = 0;                   // planner threads, 0: hardware

  PipelineConfig();
  void validate() const;
};

struct StageTimes {
  double preprocess_ms = 0.0;
  double segmentation_ms = 0.0;
  double perception_ms = 0.0;  // smoothing, BVH, normals, AABB, hull
  double planning_ms = 0.0;
  double ik_ms = 0.0;
  double trajectory_ms = 0.0;
  double end_to_end_ms = 0.0;
};

struct PipelineResult {
  double segmentation_accuracy = 0.0;
  bool grasp_success = false;
  bool feasible = false;
  std::vector<double> contact_gaps;  // signed, fingertip sphere to true surface, m
  std::vector<bool> tactile_confirmed;
  StageTimes times;
  double eta_empty = 0.0;
  double pose_estimation_error = 0.0;
  Aabb object_aabb;                  // palm frame, trimmed box of the segmented cloud
  // eta_empty is taken against the untrimmed extrema, which contain the hull.
  std::size_t cloud_points = 0;
  std::size_t kept_points = 0;
  std::size_t object_points = 0;
  std::vector<std::string> relaxations;
  std::optional<std::string> failure_reason;
  GraspHypothesis hypothesis;
  // What the planner collided against, kept for audits.
  std::vector<Point3> planning_cloud;
  std::vector<Aabb> planning_obstacles;  // inflated by the fingertip radius
  std::vector<JointTrajectory> trajectories;
  std::vector<TactileSample> tactile;
};

/// Face seeds on the object box: per finger, on the face its base points at
/// (+x for bases in front of the palm centre, -x otherwise), in the finger's
/// flex plane (y of the base, clamped to the face) at box-centre height plus
/// each offset. Approach is the inward face normal.
std::vector<std::vector<GraspSeed>> box_face_seeds(const Aabb& box, const HandModel& hand,
                                                   const std::vector<double>& offsets);

/// Full chain on a synthesized scene. Never throws for valid configs: stage
/// failures end up in failure_reason.
PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& cfg, const HandModel& hand);
PipelineResult run_pipeline(const SceneConfig& scene, const PipelineConfig& cfg,
                            const HandModel& hand);

// --- batches ------------------------------------------------------------------

struct TrialRecord {
  std::string object;
  std::string camera;
  int trial = 0;
  std::uint64_t seed = 0;
  PipelineResult result;
};

struct AggregateRow {
  std::string object;
  std::string camera;
  int trials = 0;
  double mean_sa = 0.0;
  double gsr = 0.0;  // percent
  double mean_planning_ms = 0.0;
  double max_planning_ms = 0.0;
  double mean_ik_ms = 0.0;
  double mean_pose_error_mm = 0.0;
};

struct BatchResult {
  std::vector<TrialRecord> trials;
  std::vector<AggregateRow> rows;  // one per (object, camera), first-seen order
};

/// Trial k of a scene runs with rng_seed = scene.rng_seed + k. Scenes run
/// concurrently on up to `workers` threads (0: hardware).
BatchResult batch_evaluate(const std::vector<SceneConfig>& scenes, int trials_per_scene,
                           const PipelineConfig& cfg, const HandModel& hand, int workers = 0);

/// Two objects x three cameras (front, wrist, top), all with rng_seed = base_seed.
std::vector<SceneConfig> acceptance_scenes(std::uint64_t base_seed = 1);

/// Batch description for the bench harness.
struct BenchConfig {
  std::vector<SceneConfig> scenes = acceptance_scenes(1);
  int trials = 5;
  int workers = 0;  // 0: hardware
  PipelineConfig pipeline;
};

// --- files ------------------------------------------------------------------

SceneConfig read_scene_config(std::istream& in);
SceneConfig load_scene_config(const std::filesystem::path& path);
void write_scene_config(std::ostream& out, const SceneConfig& cfg);

/// {"preprocess": {...}, "planner": <planner config>, top-level pipeline fields}
PipelineConfig read_pipeline_config(std::istream& in);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void write_pipeline_config(std::ostream& out, const PipelineConfig& cfg);

/// {"trials", "workers", "base_seed", "scenes": [scene configs], "pipeline":
/// {...}}. Without "scenes" the acceptance scenes at base_seed are used.
BenchConfig read_bench_config(std::istream& in);
BenchConfig load_bench_config(const std::filesystem::path& path);
void write_bench_config(std::ostream& out, const BenchConfig& cfg);

void write_truth_json(std::ostream& out, const SceneTruth& truth, const Scene& scene);
void write_result_json(std::ostream& out, const PipelineResult& result, bool include_timing = true);
void write_joint_trajectories_csv(std::ostream& out, const std::vector<JointTrajectory>& trajs);

/// object,camera,trial,seed,sa,success,feasible,pose_error_mm,eta_empty,
/// planning_ms,ik_ms,end_to_end_ms,failure
void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials);
/// object,camera,trials,sa,gsr,mean_planning_ms,max_planning_ms,mean_ik_ms,pose_error_mm
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

}  // namespace graspkit
