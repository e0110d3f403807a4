#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <thread>

#include "graspkit/error.hpp"
#include "graspkit/hull.hpp"
#include "graspkit/pipeline.hpp"

namespace graspkit {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Second derivatives of the natural cubic spline through (t_i, y_i).
std::vector<double> spline_moments(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  // Thomas algorithm on the interior equations.
  std::vector<double> c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
    const double a = h0, b = 2 * (h0 + h1), cc = h1;
    const double rhs = 6 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    d[i] = (rhs - a * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) m[i] = d[i] - c[i] * m[i + 1];
  return m;
}

double spline_eval(const std::vector<double>& t, const std::vector<double>& y,
                   const std::vector<double>& m, std::size_t seg, double x) {
  const double h = t[seg + 1] - t[seg];
  const double a = (t[seg + 1] - x) / h, b = (x - t[seg]) / h;
  return a * y[seg] + b * y[seg + 1] + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
}

// Height of a roughly horizontal plane (n.p = d) above the xy of `at`.
std::optional<double> level_plane_height(const std::optional<Eigen::Vector4d>& plane, const Point3& at) {
  if (!plane || std::abs((*plane)[2]) <= 0.9) return std::nullopt;
  const auto& pl = *plane;
  return (pl[3] - pl[0] * at.x() - pl[1] * at.y()) / pl[2];
}

std::string describe(const Error& e) { return std::string(e.what()); }

}  // namespace

// --- trajectories -------------------------------------------------------------

JointTrajectory smooth_and_clip(const JointTrajectory& raw, const Eigen::VectorXd& vlim, double dt) {
  if (raw.samples.size() < 2) return raw;
  if (!(dt > 0)) throw Error(Errc::kInvalidArgument, "dt must be > 0");
  const auto dof = raw.samples.front().q.size();
  if (vlim.size() != dof) throw Error(Errc::kDimensionError, "one velocity limit per joint");
  if (!(vlim.array() > 0).all()) throw Error(Errc::kInvalidArgument, "velocity limits must be > 0");
  std::vector<double> t;
  for (const auto& s : raw.samples) {
    if (s.q.size() != dof) throw Error(Errc::kDimensionError, "samples differ in joint count");
    if (!t.empty() && !(s.t > t.back())) throw Error(Errc::kInvalidArgument, "sample times must increase");
    t.push_back(s.t);
  }

  // Uniform grid, last knot exact.
  std::vector<double> grid;
  for (std::size_t k = 0;; ++k) {
    const double x = t.front() + static_cast<double>(k) * dt;
    if (x >= t.back() - 1e-9 * dt) break;
    grid.push_back(x);
  }
  grid.push_back(t.back());

  std::vector<JointConfig> q(grid.size(), JointConfig(dof));
  for (Eigen::Index j = 0; j < dof; ++j) {
    std::vector<double> y;
    for (const auto& s : raw.samples) y.push_back(s.q[j]);
    const auto m = spline_moments(t, y);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      while (seg + 2 < t.size() && grid[k] > t[seg + 1]) ++seg;
      q[k][j] = spline_eval(t, y, m, seg, grid[k]);
    }
  }
  q.front() = raw.samples.front().q;
  q.back() = raw.samples.back().q;

  // Stretch each segment until every joint rate is within its limit.
  JointTrajectory out;
  out.finger_id = raw.finger_id;
  out.samples.push_back({t.front(), q.front()});
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double need = ((q[k] - q[k - 1]).cwiseAbs().array() / vlim.array()).maxCoeff();
    const double span = std::max(grid[k] - grid[k - 1], need * (1.0 + 1e-12));
    out.samples.push_back({out.samples.back().t + span, q[k]});
  }
  return out;
}

double simulated_tactile(double gap, double contact_tolerance) {
  return std::max(0.0, 1.0 - std::max(gap, 0.0) / contact_tolerance);
}

std::vector<bool> verify_contact(const std::vector<TactileSample>& samples, double c_thresh,
                                 std::size_t num_fingers) {
  if (!(c_thresh > 0)) throw Error(Errc::kInvalidArgument, "c_thresh must be > 0");
  std::vector<bool> ok(num_fingers, false);
  for (const auto& s : samples) {
    if (s.finger_id >= 0 && static_cast<std::size_t>(s.finger_id) < num_fingers && s.c >= c_thresh) {
      ok[static_cast<std::size_t>(s.finger_id)] = true;
    }
  }
  return ok;
}

// --- pipeline ------------------------------------------------------------------

PipelineConfig::PipelineConfig() {
  preprocess.crop_box = Aabb{Point3(-0.3, -0.3, -0.25), Point3(0.3, 0.3, 0.1)};
  planner.ik.lambda = 0.01;
}

void PipelineConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(Errc::kValidationError, m); };
  preprocess.validate();
  planner.rrt.validate();
  planner.weights.validate();
  planner.ik.validate();
  if (!(region_radius > 0)) bad("region_radius must be > 0");
  if (min_object_points < 1) bad("min_object_points must be >= 1");
  if (smooth_k != 0 && smooth_k < 3) bad("smooth_k must be 0 or >= 3");
  if (normal_k < 3) bad("normal_k must be >= 3");
  if (!(extent_trim >= 0 && extent_trim < 0.5)) bad("extent_trim must be in [0, 0.5)");
  if (seed_offsets.empty()) bad("seed_offsets must not be empty");
  if (!(contact_tolerance > 0)) bad("contact_tolerance must be > 0");
  if (!(penetration_tolerance >= 0)) bad("penetration_tolerance must be >= 0");
  if (!(c_thresh > 0 && c_thresh <= 1)) bad("c_thresh must be in (0, 1]");
  if (!(raw_dt > 0)) bad("raw_dt must be > 0");
  if (!(dt > 0)) bad("dt must be > 0");
}

std::vector<std::vector<GraspSeed>> box_face_seeds(const Aabb& box, const HandModel& hand,
                                                   const std::vector<double>& offsets) {
  const Point3 c = 0.5 * (box.min + box.max);
  std::vector<std::vector<GraspSeed>> out;
  for (const auto& f : hand.fingers) {
    const Point3 base = f.joints.front().parent_offset.translation;
    const bool front = base.x() >= c.x();
    const double x = front ? box.max.x() : box.min.x();
    const double y = std::clamp(base.y(), box.min.y(), box.max.y());
    std::vector<GraspSeed> seeds;
    for (double dz : offsets) {
      const double z = std::clamp(c.z() + dz, box.min.z(), box.max.z());
      seeds.push_back({Point3(x, y, z), Vec3(front ? -1.0 : 1.0, 0.0, 0.0)});
    }
    out.push_back(std::move(seeds));
  }
  return out;
}

PipelineResult run_pipeline(const SceneConfig& scene_cfg, const PipelineConfig& cfg, const HandModel& hand) {
  Scene scene;
  try {
    scene = synthesize_scene(scene_cfg);
  } catch (const Error& e) {
    PipelineResult r;
    r.failure_reason = "scene: " + describe(e);
    return r;
  }
  return run_pipeline(scene, cfg, hand);
}

PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& cfg, const HandModel& hand) {
  const auto t_start = Clock::now();
  PipelineResult res;
  res.cloud_points = scene.cloud.size();
  std::string stage = "config";
  try {
    cfg.validate();
    hand.validate();

    stage = "preprocess";
    auto t = Clock::now();
    PointCloud palm;
    palm.points.reserve(scene.cloud.size());
    for (const auto& p : scene.cloud.points) palm.points.push_back(scene.palm_from_camera.apply(p));
    palm.labels = scene.cloud.labels;
    const PreprocessResult pre = preprocess(palm, cfg.preprocess);
    res.kept_points = pre.cloud.size();
    res.times.preprocess_ms = ms_since(t);

    stage = "segmentation";
    t = Clock::now();
    const Bvh kept = Bvh::build(pre.cloud);
    const Point3 target = 0.5 * (cfg.preprocess.crop_box.min + cfg.preprocess.crop_box.max);
    const std::size_t seed = default_seed(kept, target, cfg.region_radius, 8);
    const auto segment = segment_region_growing(kept, seed, cfg.region_radius);
    std::vector<std::uint32_t> predicted, truth;
    for (auto i : segment) predicted.push_back(pre.kept_indices[i]);
    for (std::uint32_t i = 0; i < scene.cloud.labels.size(); ++i) {
      if (scene.cloud.labels[i] == static_cast<std::int32_t>(PointLabel::kObject)) truth.push_back(i);
    }
    res.segmentation_accuracy = segmentation_accuracy(predicted, truth);
    res.object_points = segment.size();
    res.times.segmentation_ms = ms_since(t);
    if (segment.size() < cfg.min_object_points) {
      throw Error(Errc::kInsufficientPoints, "segmented object has " + std::to_string(segment.size()) +
                                                 " points, need " + std::to_string(cfg.min_object_points));
    }

    stage = "perception";
    t = Clock::now();
    PointCloud object;
    for (auto i : segment) object.points.push_back(pre.cloud.points[i]);
    if (cfg.smooth_k > 0 && object.size() >= static_cast<std::size_t>(cfg.smooth_k)) {
      object.points = smooth_points(Bvh::build(object), cfg.smooth_k);
    }
    const Bvh bvh = Bvh::build(object);
    const NormalField normals = estimate_normals(bvh, cfg.normal_k, scene.camera_position);
    res.eta_empty = empty_space_ratio(object, aabb_from_points(object)).eta;
    res.object_aabb = trimmed_aabb(object.points, cfg.extent_trim);
    // Plane removal also strips the object's lowest band; an object resting on
    // a level table reaches down to it.
    if (const auto z = level_plane_height(pre.plane, 0.5 * (res.object_aabb.min + res.object_aabb.max));
        cfg.snap_to_support && z && res.object_aabb.min.z() > *z &&
        res.object_aabb.min.z() - *z <= 2.0 * cfg.preprocess.plane_distance_threshold) {
      res.object_aabb.min.z() = *z;
    }
    const Point3 center = 0.5 * (res.object_aabb.min + res.object_aabb.max);
    res.pose_estimation_error = (center - scene.truth.centroid).norm();
    res.times.perception_ms = ms_since(t);

    stage = "planning";
    const double r = cfg.planner.rrt.fingertip_radius;
    HandPlanProblem pb;
    pb.bvh = &bvh;
    pb.normals = &normals;
    pb.hand = &hand;
    pb.weights = cfg.planner.weights;
    pb.rrt = cfg.planner.rrt;
    pb.ik = cfg.planner.ik;
    pb.min_sep = cfg.planner.min_sep;
    pb.max_resample = cfg.planner.max_resample;
    pb.max_seed_attempts = cfg.planner.max_seed_attempts;
    pb.threads = cfg.threads;
    pb.seeds = box_face_seeds(res.object_aabb, hand, cfg.seed_offsets);
    // Best-scored seeds first; equal scores keep the offset order.
    for (auto& seeds : pb.seeds) {
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        order.emplace_back(score_endpoint(seeds[i].t, seeds[i].approach, bvh, normals, pb.weights,
                                          pb.rrt.clearance, r).score, i);
      }
      std::stable_sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.first > b.first; });
      std::vector<GraspSeed> sorted;
      for (const auto& [s, i] : order) sorted.push_back(seeds[i]);
      seeds = std::move(sorted);
    }
    for (const auto& f : hand.fingers) {
      JointConfig q = JointConfig::Zero(static_cast<Eigen::Index>(f.dof()));
      if (cfg.q_open.size() == f.dof()) {
        for (std::size_t j = 0; j < f.dof(); ++j) q[static_cast<Eigen::Index>(j)] = cfg.q_open[j];
      }
      pb.q_start.push_back(clamp_to_limits(f, q));
    }
    // The table below the object is an obstacle when the removed plane is level.
    if (const auto z = level_plane_height(pre.plane, center)) {
      const Aabb& ws = pb.rrt.workspace;
      pb.obstacles.push_back(inflate(Aabb{Point3(ws.min.x(), ws.min.y(), std::min(ws.min.z(), *z) - 0.1),
                                          Point3(ws.max.x(), ws.max.y(), *z)},
                                     r));
    }
    res.planning_cloud = object.points;
    res.planning_obstacles = pb.obstacles;
    GraspHypothesis hyp = plan_hand(pb);
    if (!hyp.feasible && cfg.relaxed_replan) {
      GraspHypothesis relaxed = replan_relaxed(hyp, pb);
      relaxed.planning_ms += hyp.planning_ms;
      relaxed.ik_ms += hyp.ik_ms;
      hyp = std::move(relaxed);
    }
    res.times.ik_ms = hyp.ik_ms;
    res.times.planning_ms = hyp.planning_ms - hyp.ik_ms;
    res.feasible = hyp.feasible;
    res.relaxations = hyp.relaxations;
    res.hypothesis = hyp;
    if (!hyp.feasible) {
      // IK failures have no error code of their own.
      const std::string code = hyp.failure_code ? std::string(to_string(*hyp.failure_code)) : "IkNotConverged";
      res.failure_reason = "planning: " + code + ": " + hyp.failure_stage;
      res.times.end_to_end_ms = ms_since(t_start);
      return res;
    }

    stage = "execution";
    t = Clock::now();
    for (const auto& plan : hyp.fingers) {
      const FingerChain& chain = hand.fingers[static_cast<std::size_t>(plan.finger_id)];
      JointTrajectory raw;
      raw.finger_id = plan.finger_id;
      for (std::size_t i = 0; i < plan.path_q.size(); ++i) {
        raw.samples.push_back({static_cast<double>(i) * cfg.raw_dt, plan.path_q[i]});
      }
      Eigen::VectorXd vlim(static_cast<Eigen::Index>(chain.dof()));
      for (std::size_t j = 0; j < chain.dof(); ++j) vlim[static_cast<Eigen::Index>(j)] = chain.joints[j].velocity_limit;
      JointTrajectory traj = smooth_and_clip(raw, vlim, cfg.dt);
      for (const auto& s : traj.samples) {
        const double gap = scene.truth.signed_distance(forward_kinematics(chain, s.q).translation) - r;
        res.tactile.push_back({plan.finger_id, simulated_tactile(gap, cfg.contact_tolerance), s.t});
      }
      res.contact_gaps.push_back(
          scene.truth.signed_distance(forward_kinematics(chain, traj.samples.back().q).translation) - r);
      res.trajectories.push_back(std::move(traj));
    }
    res.tactile_confirmed = verify_contact(res.tactile, cfg.c_thresh, hand.fingers.size());
    res.times.trajectory_ms = ms_since(t);

    stage = "contact";
    for (std::size_t i = 0; i < res.contact_gaps.size(); ++i) {
      const double g = res.contact_gaps[i];
      if (g > cfg.contact_tolerance || g < -cfg.penetration_tolerance) {
        res.failure_reason = "contact: finger " + std::to_string(i) + " gap " +
                             std::to_string(g * 1000.0) + " mm outside [-" +
                             std::to_string(cfg.penetration_tolerance * 1000.0) + ", " +
                             std::to_string(cfg.contact_tolerance * 1000.0) + "] mm";
        break;
      }
    }
    res.grasp_success = !res.failure_reason.has_value();
  } catch (const Error& e) {
    res.failure_reason = stage + ": " + describe(e);
  }
  res.times.end_to_end_ms = ms_since(t_start);
  return res;
}

// --- batches --------------------------------------------------------------------

std::vector<SceneConfig> acceptance_scenes(std::uint64_t base_seed) {
  std::vector<SceneConfig> out;
  for (auto kind : {ObjectKind::kCylinder, ObjectKind::kBlock}) {
    for (auto cam : {CameraPreset::kFront, CameraPreset::kWrist, CameraPreset::kTop}) {
      out.push_back(SceneConfig::preset(kind, cam, base_seed));
    }
  }
  return out;
}

BatchResult batch_evaluate(const std::vector<SceneConfig>& scenes, int trials_per_scene,
                           const PipelineConfig& cfg, const HandModel& hand, int workers) {
  if (trials_per_scene < 1) throw Error(Errc::kInvalidArgument, "trials_per_scene must be >= 1");
  BatchResult out;
  for (const auto& s : scenes) {
    for (int k = 0; k < trials_per_scene; ++k) {
      TrialRecord rec;
      rec.object = std::string(to_string(s.object.kind));
      rec.camera = s.camera;
      rec.trial = k;
      rec.seed = s.rng_seed + static_cast<std::uint64_t>(k);
      out.trials.push_back(std::move(rec));
    }
  }
  const std::size_t n = out.trials.size();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto nworkers = static_cast<unsigned>(std::min<std::size_t>(n, workers > 0 ? static_cast<unsigned>(workers) : hw));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      SceneConfig sc = scenes[i / static_cast<std::size_t>(trials_per_scene)];
      sc.rng_seed = out.trials[i].seed;
      out.trials[i].result = run_pipeline(sc, cfg, hand);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < nworkers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  std::map<std::pair<std::string, std::string>, std::size_t> row_of;
  for (const auto& tr : out.trials) {
    const auto key = std::make_pair(tr.object, tr.camera);
    auto it = row_of.find(key);
    if (it == row_of.end()) {
      it = row_of.emplace(key, out.rows.size()).first;
      out.rows.push_back(AggregateRow{tr.object, tr.camera});
    }
    AggregateRow& row = out.rows[it->second];
    const PipelineResult& r = tr.result;
    ++row.trials;
    row.mean_sa += r.segmentation_accuracy;
    row.gsr += r.grasp_success ? 1.0 : 0.0;
    row.mean_planning_ms += r.times.planning_ms;
    row.max_planning_ms = std::max(row.max_planning_ms, r.times.planning_ms);
    row.mean_ik_ms += r.times.ik_ms;
    row.mean_pose_error_mm += 1000.0 * r.pose_estimation_error;
  }
  for (auto& row : out.rows) {
    const double n_t = row.trials;
    row.mean_sa /= n_t;
    row.gsr = 100.0 * row.gsr / n_t;
    row.mean_planning_ms /= n_t;
    row.mean_ik_ms /= n_t;
    row.mean_pose_error_mm /= n_t;
  }
  return out;
}

}  // namespace graspkit
