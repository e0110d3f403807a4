#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graspkit/bvh.hpp"
#include "graspkit/error.hpp"
#include "graspkit/kinematics.hpp"
#include "graspkit/perception.hpp"

namespace graspkit {

/// Candidate contact: surface point t and unit approach direction (pointing
/// into the surface).
struct GraspSeed {
  Point3 t = Point3::Zero();
  Vec3 approach = -Vec3::UnitZ();
  void validate() const;
};

struct RrtConfig {
  double step = 0.01;                         // m
  double goal_bias = 0.1;                     // [0, 1]
  double rewire_radius = 0.03;                // m
  int max_samples = 1500;
  double time_budget_ms = 250.0;
  double goal_tolerance = 0.005;              // m
  double collision_check_resolution = 0.002;  // m
  double fingertip_radius = 0.008;            // r, m
  double clearance = 0.01;                    // delta, m
  std::uint64_t rng_seed = 1;
  // Sampling region (fixed wrist: the fingertip workspace in the palm frame).
  Aabb workspace{Point3(-0.16, -0.16, -0.2), Point3(0.16, 0.16, 0.0)};
  int max_trajectories = 8;
  void validate() const;
};

struct FingerTrajectory {
  int finger_id = 0;
  std::vector<Point3> waypoints;
  double cost = 0.0;  // sum of segment lengths
};

struct RrtStats {
  bool audit_costs = false;  // input: verify cost-to-come never increases
  int samples = 0;
  std::size_t nodes = 0;
  int rewires = 0;
  std::size_t goal_nodes = 0;
  std::size_t cost_increases = 0;  // only counted with audit_costs
  bool budget_exhausted = false;
  double elapsed_ms = 0.0;
};

/// Fingertip-sphere collision model: a point is free when every cloud point
/// is farther than r and it lies outside every obstacle box. Obstacle boxes
/// are used as given (inflate them by r beforehand for a sphere test).
class FingertipCollision {
 public:
  FingertipCollision(const Bvh& cloud, std::vector<Aabb> obstacles, double radius);
  bool point_free(const Point3& p) const;
  /// Samples the closed segment at `resolution` (both ends included).
  bool segment_free(const Point3& a, const Point3& b, double resolution) const;
  double radius() const { return radius_; }

 private:
  const Bvh* cloud_;
  std::vector<Aabb> obstacles_;
  double radius_;
};

/// Standoff goal: seed.t moved back by `clearance` against the approach.
Point3 standoff_point(const GraspSeed& seed, double clearance);

/// RRT* from `start` to the goal ball of radius goal_tolerance around the
/// standoff point. The straight segment and one lateral arc are inserted as
/// initial branches when free. Returns up to max_trajectories paths, sorted by
/// cost then goal-node id, densified so consecutive waypoints are <= step
/// apart. Stops at max_samples or time_budget_ms, whichever comes first.
/// Throws kPreconditionViolation when start is not free, kNoTrajectoryFound
/// when no node reaches the goal.
std::vector<FingerTrajectory> rrt_star(const Point3& start, const GraspSeed& seed,
                                       const Bvh& object, const std::vector<Aabb>& obstacles,
                                       const RrtConfig& cfg, int finger_id = 0,
                                       RrtStats* stats = nullptr);

struct PlannerWeights {
  double alpha = 1.0;
  double beta = 0.5;
  double gamma = 0.5;
  void validate() const;
};

struct CandidateEndpoint {
  RigidTransform pose;  // position + approach-aligned frame
  Vec3 approach = -Vec3::UnitZ();
  std::size_t nearest = 0;  // cloud index closest to the position
  double d_min = 0.0;
  double phi = 0.0;
  double kappa = 0.0;
  double score = 0.0;
};

/// Fingertip frame for an approach direction: z = -approach, x from the palm
/// up-vector by Gram-Schmidt, falling back to palm x when approach is
/// (anti)parallel to up.
Mat3 approach_frame(const Vec3& approach);

/// -alpha * d_min + beta * phi - gamma * kappa with
///   d_min: distance to the closest cloud point,
///   phi:   |n . approach| at that point,
///   kappa: max(0, 1 - c / clearance), c the distance from t to the closest
///          point farther than 2 * fingertip_radius from the closest point
///          (0 when there is none).
double endpoint_score(double d_min, double phi, double kappa, const PlannerWeights& w);
CandidateEndpoint score_endpoint(const Point3& t, const Vec3& approach, const Bvh& bvh,
                                 const NormalField& normals, const PlannerWeights& weights,
                                 double clearance, double fingertip_radius);

/// True iff the ray camera -> t enters no occluder before reaching t.
bool visibility_check(const Point3& camera, const Point3& t, const std::vector<Aabb>& occluders);

struct EndpointSelection {
  std::size_t trajectory = 0;
  std::size_t waypoint = 0;
  double distance = 0.0;
};

/// Waypoint closest to the cloud over all trajectories. Ties: lower
/// trajectory cost, then lower waypoint index, then lower trajectory position.
/// Throws kNoCandidates on an empty list or when every trajectory is empty.
EndpointSelection select_endpoint(const std::vector<FingerTrajectory>& trajectories,
                                  const Bvh& bvh);

/// Fingertip centre at the end of the straight approach from the standoff:
/// seed.t backed off by the fingertip radius. Lateral drift of the RRT* goal
/// node is discarded, so the contact stays on the seed's approach line.
Point3 contact_position(const GraspSeed& seed, double fingertip_radius);

// --- multi-finger planning ----------------------------------------------

enum class FingerStatus {
  kPlanned,
  kNoTrajectory,
  kIkFailed,
  kNoSeeds,
};
std::string_view to_string(FingerStatus s);

struct FingerPlan {
  int finger_id = 0;
  FingerStatus status = FingerStatus::kNoSeeds;
  std::size_t seed_rank = 0;  // index into this finger's seed list
  GraspSeed seed;
  std::vector<FingerTrajectory> trajectories;
  EndpointSelection selection;
  Point3 contact = Point3::Zero();
  CandidateEndpoint endpoint;  // scored at the contact position
  IkResult ik;                 // contact pose
  std::vector<JointConfig> path_q;  // q_start, waypoints up to the selection, contact
  bool converged = false;
  std::string detail;
};

struct HandPlanProblem {
  // Per finger, seeds in preference order; the planner walks down the list
  // when a seed fails or is demoted.
  std::vector<std::vector<GraspSeed>> seeds;
  std::vector<JointConfig> q_start;
  const Bvh* bvh = nullptr;
  const NormalField* normals = nullptr;
  const HandModel* hand = nullptr;
  std::vector<Aabb> obstacles;  // already inflated by the fingertip radius
  PlannerWeights weights;
  RrtConfig rrt;
  IkSettings ik;
  double min_sep = 0.015;
  int max_resample = 3;
  int max_seed_attempts = 4;  // seeds tried per finger per (re)plan
  int threads = 0;            // 0: hardware concurrency
};

struct GraspHypothesis {
  std::vector<FingerPlan> fingers;
  double aggregate_score = 0.0;
  bool feasible = false;
  std::string failure_stage;  // empty when feasible
  std::optional<Errc> failure_code;
  int resample_rounds = 0;
  std::vector<std::string> relaxations;
  double planning_ms = 0.0;
  double ik_ms = 0.0;
};

/// Plans every finger independently (concurrently), then enforces pairwise
/// contact separation >= min_sep and the consistency pass (standoff fingertip
/// boxes vs the cloud, pairwise contact-box overlap). Conflicts demote the
/// lower-scored finger to its next seed, for at most max_resample rounds.
GraspHypothesis plan_hand(const HandPlanProblem& problem);

/// Re-runs plan_hand with goal_tolerance x2, time_budget x2 and gamma = 0.
/// Throws kPreconditionViolation for a feasible `previous`.
GraspHypothesis replan_relaxed(const GraspHypothesis& previous, const HandPlanProblem& problem);

// --- files -------------------------------------------------------------

struct PlannerConfig {
  RrtConfig rrt;
  PlannerWeights weights;
  IkSettings ik;
  double min_sep = 0.015;
  int max_resample = 3;
  int max_seed_attempts = 4;
};

/// JSON with optional "rrt", "weights", "ik" objects and top-level min_sep /
/// max_resample / max_seed_attempts. Omitted fields keep their defaults.
PlannerConfig read_planner_config(std::istream& in);
PlannerConfig load_planner_config(const std::filesystem::path& path);
void write_planner_config(std::ostream& out, const PlannerConfig& cfg);

/// finger_id,waypoint_index,x,y,z
void write_trajectories_csv(std::ostream& out, const std::vector<FingerTrajectory>& trajectories);
/// ASCII PLY with one edge element per consecutive waypoint pair.
void write_trajectories_ply(std::ostream& out, const std::vector<FingerTrajectory>& trajectories);

}  // namespace graspkit
