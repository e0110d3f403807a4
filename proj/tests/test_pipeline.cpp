#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graspkit/error.hpp"
#include "graspkit/pipeline.hpp"

using namespace graspkit;

namespace {

constexpr double kPi = std::numbers::pi;

const HandModel& hand() {
  static const HandModel h = load_hand_model(std::string(GRASPKIT_SOURCE_DIR) + "/data/hand_synthetic.json");
  return h;
}

SceneConfig clean(SceneConfig c) {
  c.noise_sigma = 0.0;
  c.outlier_fraction = 0.0;
  c.plane = false;
  return c;
}

std::vector<Point3> to_palm(const Scene& s) {
  std::vector<Point3> out;
  for (const auto& p : s.cloud.points) out.push_back(s.palm_from_camera.apply(p));
  return out;
}

// Independent analytic oracles in the object's local frame.
bool on_cylinder(const Point3& p, double radius, double height, double tol) {
  const double r = std::hypot(p.x(), p.y());
  const bool side = std::abs(r - radius) < tol && std::abs(p.z()) <= height / 2 + tol;
  const bool cap = std::abs(std::abs(p.z()) - height / 2) < tol && r <= radius + tol;
  return side || cap;
}

Vec3 cylinder_normal(const Point3& p, double radius, double height) {
  const double r = std::hypot(p.x(), p.y());
  if (std::abs(std::abs(p.z()) - height / 2) < 1e-9 && r < radius - 1e-9) {
    return Vec3(0, 0, p.z() > 0 ? 1 : -1);
  }
  return Vec3(p.x() / r, p.y() / r, 0);
}

// Distance from a point to the boundary of a solid cylinder, signed.
double cylinder_sdf(const Point3& p, double radius, double height) {
  const double dr = std::hypot(p.x(), p.y()) - radius;
  const double dz = std::abs(p.z()) - height / 2;
  const double out = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
  return out > 0 ? out : std::max(dr, dz);
}

bool inside_block(const Point3& p, const Vec3& size) {
  return (p.cwiseAbs().array() < (size / 2).array()).all();
}

}  // namespace

// --- shapes and scenes ------------------------------------------------------

TEST(ObjectShape, AreaAndVolumeMatchClosedForms) {
  ObjectShape c;
  EXPECT_NEAR(c.surface_area(), 2 * kPi * 0.055 * 0.12 + 2 * kPi * 0.055 * 0.055, 1e-15);
  EXPECT_NEAR(c.volume(), kPi * 0.055 * 0.055 * 0.12, 1e-15);
  ObjectShape b;
  b.kind = ObjectKind::kBlock;
  b.size = Vec3(1, 2, 3);
  EXPECT_DOUBLE_EQ(b.surface_area(), 22.0);
  EXPECT_DOUBLE_EQ(b.volume(), 6.0);
}

TEST(ObjectShape, RayEntryMatchesMarchingOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (auto kind : {ObjectKind::kCylinder, ObjectKind::kBlock}) {
    ObjectShape s;
    s.kind = kind;
    int hits = 0;
    for (int i = 0; i < 400; ++i) {
      const Point3 o(u(rng), u(rng), u(rng));
      const bool inside0 = kind == ObjectKind::kCylinder ? cylinder_sdf(o, s.radius, s.height) < 0
                                                         : inside_block(o, s.size);
      if (inside0) continue;
      const Point3 target(u(rng) * 0.2, u(rng) * 0.2, u(rng) * 0.2);
      const Vec3 d = (target - o).normalized();
      // March in 0.1 mm steps for the first inside sample.
      std::optional<double> march;
      for (double t = 0; t < 0.8; t += 1e-4) {
        const Point3 p = o + t * d;
        const bool in = kind == ObjectKind::kCylinder ? cylinder_sdf(p, s.radius, s.height) < 0
                                                      : inside_block(p, s.size);
        if (in) {
          march = t;
          break;
        }
      }
      const auto got = s.ray_entry(o, d);
      ASSERT_EQ(got.has_value(), march.has_value()) << i;
      if (got) {
        ++hits;
        EXPECT_NEAR(*got, *march, 1.5e-4);
      }
    }
    EXPECT_GT(hits, 50);
  }
}

TEST(SynthesizeScene, NoiseFreeCylinderSamplesLieOnTheSurfaceAndFaceTheCamera) {
  const SceneConfig cfg = clean(SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kFront, 3));
  const Scene s = synthesize_scene(cfg);
  ASSERT_GT(s.cloud.size(), 1000u);
  const RigidTransform inv = cfg.object_pose.inverse();
  const Point3 cam = inv.apply(cfg.camera_position);
  for (const auto& palm : to_palm(s)) {
    const Point3 p = inv.apply(palm);
    ASSERT_TRUE(on_cylinder(p, cfg.object.radius, cfg.object.height, 1e-9)) << p.transpose();
    EXPECT_GT(cylinder_normal(p, cfg.object.radius, cfg.object.height).dot(cam - p), 0.0);
  }
}

TEST(SynthesizeScene, BlockShowsAtMostThreeFaces) {
  for (auto cam : {CameraPreset::kFront, CameraPreset::kWrist, CameraPreset::kTop}) {
    const SceneConfig cfg = clean(SceneConfig::preset(ObjectKind::kBlock, cam, 4));
    const Scene s = synthesize_scene(cfg);
    const RigidTransform inv = cfg.object_pose.inverse();
    std::set<std::pair<int, int>> faces;
    for (const auto& palm : to_palm(s)) {
      const Point3 p = inv.apply(palm);
      for (int a = 0; a < 3; ++a) {
        if (std::abs(std::abs(p[a]) - cfg.object.size[a] / 2) < 1e-9) faces.insert({a, p[a] > 0 ? 1 : -1});
      }
    }
    EXPECT_EQ(faces.size(), 3u) << to_string(cam);
  }
}

TEST(SynthesizeScene, LabelsAreAllObjectWithoutPlaneOrOutliers) {
  const Scene s = synthesize_scene(clean(SceneConfig::preset(ObjectKind::kBlock, CameraPreset::kTop, 2)));
  ASSERT_EQ(s.cloud.labels.size(), s.cloud.size());
  for (auto l : s.cloud.labels) ASSERT_EQ(l, 0);
}

TEST(SynthesizeScene, OutlierShareMatchesTheFraction) {
  SceneConfig cfg = SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kFront, 8);
  cfg.outlier_fraction = 0.2;
  const Scene s = synthesize_scene(cfg);
  const auto outliers = std::count(s.cloud.labels.begin(), s.cloud.labels.end(), 2);
  EXPECT_NEAR(static_cast<double>(outliers) / static_cast<double>(s.cloud.size()), 0.2, 2e-3);
  const auto plane = std::count(s.cloud.labels.begin(), s.cloud.labels.end(), 1);
  EXPECT_GT(plane, 0);
  ASSERT_TRUE(s.truth.plane_z.has_value());
  EXPECT_NEAR(*s.truth.plane_z, -0.145, 1e-12);
}

TEST(SynthesizeScene, CameraFrameLooksAtTheCentroid) {
  const SceneConfig cfg = SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kWrist, 1);
  const Scene s = synthesize_scene(cfg);
  EXPECT_TRUE(s.palm_from_camera.is_valid());
  EXPECT_LT((s.palm_from_camera.translation - cfg.camera_position).norm(), 1e-12);
  const Vec3 look = (s.truth.centroid - cfg.camera_position).normalized();
  EXPECT_NEAR(s.palm_from_camera.apply_vector(Vec3::UnitZ()).dot(look), 1.0, 1e-12);
}

TEST(SynthesizeScene, CameraInsideTheObjectIsInvalid) {
  SceneConfig cfg = SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kFront, 1);
  cfg.camera = "custom";
  cfg.camera_position = Point3(0.0, 0.0, -0.09);
  try {
    (void)synthesize_scene(cfg);
    FAIL() << "expected InvalidScene";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidScene);
  }
}

TEST(SynthesizeScene, SeedDeterminesTheCloud) {
  const SceneConfig a = SceneConfig::preset(ObjectKind::kBlock, CameraPreset::kFront, 11);
  SceneConfig b = a;
  b.rng_seed = 12;
  const Scene s1 = synthesize_scene(a), s2 = synthesize_scene(a), s3 = synthesize_scene(b);
  EXPECT_EQ(s1.cloud.points, s2.cloud.points);
  EXPECT_EQ(s1.cloud.labels, s2.cloud.labels);
  EXPECT_NE(s1.cloud.points, s3.cloud.points);
}

TEST(SceneConfig, ValidationNamesTheField) {
  SceneConfig c;
  c.outlier_fraction = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c = SceneConfig{};
  c.object.radius = 0;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kValidationError);
    EXPECT_EQ(e.detail().rfind("radius", 0), 0u);
  }
}

// --- trajectories -------------------------------------------------------------

namespace {

// Natural cubic spline by a dense solve of the moment equations.
double natural_spline_oracle(const std::vector<double>& t, const std::vector<double>& y, double x) {
  const int n = static_cast<int>(t.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  A(0, 0) = A(n - 1, n - 1) = 1;
  for (int i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1], h1 = t[i + 1] - t[i];
    A(i, i - 1) = h0 / 6;
    A(i, i) = (h0 + h1) / 3;
    A(i, i + 1) = h1 / 6;
    b[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
  }
  const Eigen::VectorXd m = A.fullPivLu().solve(b);
  int s = 0;
  while (s + 2 < n && x > t[s + 1]) ++s;
  const double h = t[s + 1] - t[s], a = (t[s + 1] - x) / h, c = (x - t[s]) / h;
  return a * y[s] + c * y[s + 1] + ((a * a * a - a) * m[s] + (c * c * c - c) * m[s + 1]) * h * h / 6;
}

JointTrajectory raw_trajectory(const std::vector<std::vector<double>>& qs, double dt) {
  JointTrajectory r;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    JointConfig q(static_cast<Eigen::Index>(qs[i].size()));
    for (std::size_t j = 0; j < qs[i].size(); ++j) q[static_cast<Eigen::Index>(j)] = qs[i][j];
    r.samples.push_back({static_cast<double>(i) * dt, q});
  }
  return r;
}

}  // namespace

TEST(SmoothAndClip, SlowMotionFollowsTheNaturalSpline) {
  const auto raw = raw_trajectory({{0.0, 0.0}, {0.1, -0.05}, {0.15, 0.02}, {0.12, 0.08}, {0.2, 0.1}}, 0.5);
  const Eigen::VectorXd vlim = Eigen::VectorXd::Constant(2, 10.0);
  const auto out = smooth_and_clip(raw, vlim, 0.05);
  ASSERT_EQ(out.samples.size(), 41u);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> t, y;
    for (const auto& s : raw.samples) {
      t.push_back(s.t);
      y.push_back(s.q[j]);
    }
    for (std::size_t k = 0; k < out.samples.size(); ++k) {
      EXPECT_NEAR(out.samples[k].t, 0.05 * static_cast<double>(k), 1e-12);
      EXPECT_NEAR(out.samples[k].q[j], natural_spline_oracle(t, y, out.samples[k].t), 1e-12);
    }
  }
}

TEST(SmoothAndClip, EndpointsAreExactAndRatesStayWithinLimits) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> qs(6, std::vector<double>(4));
    for (auto& q : qs) {
      for (auto& v : q) v = u(rng);
    }
    const auto raw = raw_trajectory(qs, 0.1);
    Eigen::VectorXd vlim(4);
    vlim << 0.5, 1.0, 2.0, 3.0;
    const auto out = smooth_and_clip(raw, vlim, 0.02);
    EXPECT_EQ(out.samples.front().q, raw.samples.front().q);
    EXPECT_EQ(out.samples.back().q, raw.samples.back().q);
    for (std::size_t k = 1; k < out.samples.size(); ++k) {
      const double dt = out.samples[k].t - out.samples[k - 1].t;
      ASSERT_GE(dt, 0.02 - 1e-12);
      const Eigen::VectorXd rate = (out.samples[k].q - out.samples[k - 1].q).cwiseAbs() / dt;
      ASSERT_TRUE((rate.array() <= vlim.array() * (1 + 1e-9)).all()) << trial << " " << k;
    }
  }
}

TEST(SmoothAndClip, FastMoveIsStretchedInTime) {
  const auto raw = raw_trajectory({{0.0}, {1.0}}, 0.1);
  const auto out = smooth_and_clip(raw, Eigen::VectorXd::Constant(1, 2.0), 0.02);
  // One radian at 2 rad/s needs at least half a second.
  EXPECT_GE(out.samples.back().t - out.samples.front().t, 0.5 - 1e-12);
  EXPECT_EQ(out.samples.back().q[0], 1.0);
}

TEST(SmoothAndClip, SingleSampleAndBadInputs) {
  const auto one = raw_trajectory({{0.3, 0.4}}, 0.1);
  EXPECT_EQ(smooth_and_clip(one, Eigen::VectorXd::Ones(2), 0.02).samples.size(), 1u);
  auto raw = raw_trajectory({{0.0, 0.0}, {0.1, 0.1}}, 0.1);
  EXPECT_THROW(smooth_and_clip(raw, Eigen::VectorXd::Ones(3), 0.02), Error);
  EXPECT_THROW(smooth_and_clip(raw, Eigen::VectorXd::Ones(2), 0.0), Error);
  raw.samples[1].t = 0.0;
  EXPECT_THROW(smooth_and_clip(raw, Eigen::VectorXd::Ones(2), 0.02), Error);
}

// --- contact -------------------------------------------------------------------

TEST(Tactile, ResponseFallsLinearlyWithTheGap) {
  EXPECT_DOUBLE_EQ(simulated_tactile(0.0, 0.005), 1.0);
  EXPECT_DOUBLE_EQ(simulated_tactile(0.0025, 0.005), 0.5);
  EXPECT_DOUBLE_EQ(simulated_tactile(0.005, 0.005), 0.0);
  EXPECT_DOUBLE_EQ(simulated_tactile(0.01, 0.005), 0.0);
  EXPECT_DOUBLE_EQ(simulated_tactile(-0.001, 0.005), 1.0);
}

TEST(Tactile, VerifyContactNeedsOneSampleAtThreshold) {
  const std::vector<TactileSample> s{{0, 0.4, 0.0}, {0, 0.5, 0.1}, {1, 0.49, 0.0}, {3, 0.9, 0.0}, {7, 1.0, 0.0}};
  EXPECT_EQ(verify_contact(s, 0.5, 4), (std::vector<bool>{true, false, false, true}));
  EXPECT_EQ(verify_contact({}, 0.5, 2), (std::vector<bool>{false, false}));
  EXPECT_THROW(verify_contact(s, 0.0, 4), Error);
}

// --- pipeline ------------------------------------------------------------------

TEST(BoxFaceSeeds, ThumbTakesTheBackFaceAndFingersTheFront) {
  const Aabb box{Point3(-0.05, -0.06, -0.15), Point3(0.06, 0.06, -0.03)};
  const auto seeds = box_face_seeds(box, hand(), {0.0, 0.01});
  ASSERT_EQ(seeds.size(), hand().fingers.size());
  const double cz = -0.09;
  for (std::size_t f = 0; f < seeds.size(); ++f) {
    const Point3 base = hand().fingers[f].joints.front().parent_offset.translation;
    const bool thumb = base.x() < 0.0055;
    ASSERT_EQ(seeds[f].size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& s = seeds[f][k];
      EXPECT_DOUBLE_EQ(s.t.x(), thumb ? -0.05 : 0.06);
      EXPECT_DOUBLE_EQ(s.approach.x(), thumb ? 1.0 : -1.0);
      EXPECT_DOUBLE_EQ(s.t.y(), std::clamp(base.y(), -0.06, 0.06));
      EXPECT_NEAR(s.t.z(), cz + (k == 0 ? 0.0 : 0.01), 1e-15);
    }
  }
}

TEST(RunPipeline, DefaultCylinderFrontCameraSucceeds) {
  const PipelineConfig cfg;
  const auto r = run_pipeline(SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kFront, 1), cfg, hand());
  ASSERT_FALSE(r.failure_reason) << *r.failure_reason;
  EXPECT_TRUE(r.grasp_success);
  EXPECT_TRUE(r.feasible);
  EXPECT_GE(r.segmentation_accuracy, 85.0);
  EXPECT_LT(r.pose_estimation_error, 0.005);
  ASSERT_EQ(r.contact_gaps.size(), hand().fingers.size());
  ASSERT_EQ(r.trajectories.size(), hand().fingers.size());
  for (std::size_t f = 0; f < r.trajectories.size(); ++f) {
    // Execution ends at the planned contact configuration.
    EXPECT_EQ(r.trajectories[f].samples.back().q, r.hypothesis.fingers[f].path_q.back());
  }
}

TEST(RunPipeline, SuccessfulGapsPassTheAnalyticContactAudit) {
  const PipelineConfig cfg;
  int audited = 0;
  for (std::uint64_t seed : {2u, 3u}) {
    const SceneConfig sc = SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kTop, seed);
    const auto r = run_pipeline(sc, cfg, hand());
    if (!r.grasp_success) continue;
    ++audited;
    const RigidTransform inv = sc.object_pose.inverse();
    for (const auto& tr : r.trajectories) {
      const auto& chain = hand().fingers[static_cast<std::size_t>(tr.finger_id)];
      const Point3 tip = forward_kinematics(chain, tr.samples.back().q).translation;
      const double gap = cylinder_sdf(inv.apply(tip), sc.object.radius, sc.object.height) -
                         cfg.planner.rrt.fingertip_radius;
      EXPECT_LE(gap, cfg.contact_tolerance);
      EXPECT_GE(gap, -cfg.penetration_tolerance);
      EXPECT_NEAR(gap, r.contact_gaps[static_cast<std::size_t>(tr.finger_id)], 1e-12);
    }
  }
  EXPECT_GT(audited, 0);
}

TEST(RunPipeline, IsDeterministic) {
  const PipelineConfig cfg;
  const SceneConfig sc = SceneConfig::preset(ObjectKind::kBlock, CameraPreset::kWrist, 4);
  const auto a = run_pipeline(sc, cfg, hand());
  const auto b = run_pipeline(sc, cfg, hand());
  EXPECT_EQ(a.segmentation_accuracy, b.segmentation_accuracy);
  EXPECT_EQ(a.contact_gaps, b.contact_gaps);
  EXPECT_EQ(a.grasp_success, b.grasp_success);
  EXPECT_EQ(a.failure_reason, b.failure_reason);
  ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
  for (std::size_t f = 0; f < a.trajectories.size(); ++f) {
    ASSERT_EQ(a.trajectories[f].samples.size(), b.trajectories[f].samples.size());
    EXPECT_EQ(a.trajectories[f].samples.back().q, b.trajectories[f].samples.back().q);
  }
}

TEST(RunPipeline, ObjectOutOfReachFailsInPlanning) {
  SceneConfig sc = SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kFront, 1);
  sc.object.radius = 0.02;
  sc.object.height = 0.05;
  sc.object_pose.translation = Point3(0.0, 0.0, -0.2);
  const auto r = run_pipeline(sc, PipelineConfig{}, hand());
  EXPECT_FALSE(r.grasp_success);
  ASSERT_TRUE(r.failure_reason);
  EXPECT_EQ(r.failure_reason->rfind("planning: ", 0), 0u) << *r.failure_reason;
}

TEST(RunPipeline, PureClutterFailsBeforePlanning) {
  Scene s = synthesize_scene(SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kFront, 1));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  s.cloud.points.clear();
  for (int i = 0; i < 2000; ++i) s.cloud.points.emplace_back(u(rng), u(rng), u(rng));
  s.cloud.labels.assign(s.cloud.points.size(), 2);
  const auto r = run_pipeline(s, PipelineConfig{}, hand());
  EXPECT_FALSE(r.grasp_success);
  ASSERT_TRUE(r.failure_reason);
  const bool early = r.failure_reason->rfind("preprocess: ", 0) == 0 ||
                     r.failure_reason->rfind("segmentation: ", 0) == 0;
  EXPECT_TRUE(early) << *r.failure_reason;
  EXPECT_DOUBLE_EQ(r.segmentation_accuracy, 0.0);
}

TEST(RunPipeline, InvalidSceneIsReportedNotThrown) {
  SceneConfig sc = SceneConfig::preset(ObjectKind::kBlock, CameraPreset::kFront, 1);
  sc.camera = "custom";
  sc.camera_position = sc.object_pose.translation;
  const auto r = run_pipeline(sc, PipelineConfig{}, hand());
  ASSERT_TRUE(r.failure_reason);
  EXPECT_EQ(*r.failure_reason, "scene: InvalidScene: camera is inside or on the object");
}

TEST(PipelineConfig, Validation) {
  PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.extent_trim = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c = PipelineConfig{};
  c.seed_offsets.clear();
  EXPECT_THROW(c.validate(), Error);
  c = PipelineConfig{};
  c.c_thresh = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

// --- batches ------------------------------------------------------------------

TEST(BatchEvaluate, RowsAggregateTheTrials) {
  PipelineConfig cfg;
  const std::vector<SceneConfig> scenes{SceneConfig::preset(ObjectKind::kBlock, CameraPreset::kFront, 40),
                                        SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kTop, 50)};
  const auto b = batch_evaluate(scenes, 2, cfg, hand(), 2);
  ASSERT_EQ(b.trials.size(), 4u);
  ASSERT_EQ(b.rows.size(), 2u);
  EXPECT_EQ(b.trials[1].seed, 41u);
  EXPECT_EQ(b.trials[3].seed, 51u);
  for (std::size_t r = 0; r < 2; ++r) {
    double sa = 0, ok = 0, pe = 0;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& res = b.trials[2 * r + k].result;
      sa += res.segmentation_accuracy;
      ok += res.grasp_success ? 1 : 0;
      pe += res.pose_estimation_error * 1000;
    }
    EXPECT_EQ(b.rows[r].trials, 2);
    EXPECT_NEAR(b.rows[r].mean_sa, sa / 2, 1e-12);
    EXPECT_NEAR(b.rows[r].gsr, 50.0 * ok, 1e-12);
    EXPECT_NEAR(b.rows[r].mean_pose_error_mm, pe / 2, 1e-12);
  }
  EXPECT_EQ(b.rows[0].object, "block");
  EXPECT_EQ(b.rows[1].camera, "top");
}

TEST(BatchEvaluate, WorkerCountDoesNotChangeResults) {
  const PipelineConfig cfg;
  const std::vector<SceneConfig> scenes{SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kWrist, 9)};
  const auto a = batch_evaluate(scenes, 3, cfg, hand(), 1);
  const auto b = batch_evaluate(scenes, 3, cfg, hand(), 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.trials[i].result.contact_gaps, b.trials[i].result.contact_gaps);
    EXPECT_EQ(a.trials[i].result.segmentation_accuracy, b.trials[i].result.segmentation_accuracy);
  }
}

TEST(AcceptanceScenes, TwoObjectsThreeCameras) {
  const auto s = acceptance_scenes(7);
  ASSERT_EQ(s.size(), 6u);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& c : s) {
    EXPECT_EQ(c.rng_seed, 7u);
    EXPECT_DOUBLE_EQ(c.noise_sigma, 0.002);
    EXPECT_DOUBLE_EQ(c.outlier_fraction, 0.01);
    EXPECT_TRUE(c.plane);
    seen.insert({std::string(to_string(c.object.kind)), c.camera});
  }
  EXPECT_EQ(seen.size(), 6u);
}

// --- files ------------------------------------------------------------------

TEST(SceneConfigFile, RoundTripAndPresetDefaults) {
  std::istringstream in(R"({"object": {"type": "block"}, "camera": "top", "rng_seed": 9})");
  const SceneConfig c = read_scene_config(in);
  const SceneConfig p = SceneConfig::preset(ObjectKind::kBlock, CameraPreset::kTop, 9);
  EXPECT_EQ(c.camera_position, p.camera_position);
  EXPECT_EQ(c.object_pose.translation, p.object_pose.translation);
  std::stringstream io;
  write_scene_config(io, c);
  const SceneConfig d = read_scene_config(io);
  EXPECT_EQ(d.object.size, c.object.size);
  EXPECT_EQ(d.object_pose.rotation, c.object_pose.rotation);
  EXPECT_EQ(d.rng_seed, 9u);
  EXPECT_EQ(d.camera, "top");
}

TEST(SceneConfigFile, CustomCameraNeedsAPosition) {
  std::istringstream a(R"({"object": {"type": "cylinder"}, "camera": "custom"})");
  EXPECT_THROW(read_scene_config(a), Error);
  std::istringstream b(R"({"object": {"type": "cylinder"}, "camera": "custom", "camera_position": [0.3, 0, 0.1]})");
  EXPECT_EQ(read_scene_config(b).camera_position, Point3(0.3, 0, 0.1));
  std::istringstream c(R"({"object": {"type": "cylinder"}, "camera_position": [0.3, 0, 0.1]})");
  EXPECT_THROW(read_scene_config(c), Error);
}

TEST(SceneConfigFile, ErrorsNameTheLine) {
  std::istringstream in("{\n  \"object\": {\"type\": \"cylinder\"},\n  \"noise_sigma\": -1\n}\n");
  try {
    (void)read_scene_config(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kValidationError);
    EXPECT_EQ(e.detail(), "line 3: noise_sigma must be >= 0");
  }
  std::istringstream unknown(R"({"object": {"type": "cylinder"}, "colour": 1})");
  EXPECT_THROW(read_scene_config(unknown), Error);
  std::istringstream bad_type(R"({"object": {"type": "sphere"}})");
  EXPECT_THROW(read_scene_config(bad_type), Error);
}

TEST(PipelineConfigFile, RoundTripKeepsEveryField) {
  PipelineConfig c;
  c.extent_trim = 0.002;
  c.seed_offsets = {0.0, 0.004};
  c.planner.rrt.max_samples = 321;
  c.preprocess.plane_iterations = 77;
  c.relaxed_replan = false;
  std::stringstream io;
  write_pipeline_config(io, c);
  const PipelineConfig d = read_pipeline_config(io);
  EXPECT_EQ(d.extent_trim, 0.002);
  EXPECT_EQ(d.seed_offsets, c.seed_offsets);
  EXPECT_EQ(d.planner.rrt.max_samples, 321);
  EXPECT_EQ(d.preprocess.plane_iterations, 77);
  EXPECT_EQ(d.preprocess.crop_box.min, c.preprocess.crop_box.min);
  EXPECT_FALSE(d.relaxed_replan);
  EXPECT_EQ(d.planner.ik.lambda, c.planner.ik.lambda);
}

TEST(PipelineConfigFile, PartialPlannerKeepsPipelineDamping) {
  std::istringstream in(R"({"planner": {"min_sep": 0.01}})");
  const PipelineConfig d = read_pipeline_config(in);
  EXPECT_EQ(d.planner.min_sep, 0.01);
  EXPECT_EQ(d.planner.ik.lambda, PipelineConfig{}.planner.ik.lambda);
  std::istringstream bad(R"({"preprocess": {"outlier_k": 1}})");
  EXPECT_THROW(read_pipeline_config(bad), Error);
}

TEST(ResultFiles, JsonAndCsvCarryTheMetrics) {
  const PipelineConfig cfg;
  const SceneConfig sc = SceneConfig::preset(ObjectKind::kCylinder, CameraPreset::kFront, 1);
  const Scene scene = synthesize_scene(sc);
  const auto r = run_pipeline(scene, cfg, hand());

  std::stringstream js;
  write_result_json(js, r, false);
  const auto j = nlohmann::json::parse(js.str());
  EXPECT_EQ(j.at("grasp_success").get<bool>(), r.grasp_success);
  EXPECT_EQ(j.at("segmentation_accuracy").get<double>(), r.segmentation_accuracy);
  EXPECT_FALSE(j.contains("times_ms"));
  EXPECT_EQ(j.at("fingers").size(), hand().fingers.size());

  std::stringstream truth;
  write_truth_json(truth, scene.truth, scene);
  const auto t = nlohmann::json::parse(truth.str());
  EXPECT_EQ(t.at("points").at("total").get<std::size_t>(), scene.cloud.size());

  std::stringstream csv;
  write_joint_trajectories_csv(csv, r.trajectories);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "finger_id,sample_index,t,joint_index,q");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  std::size_t expected = 0;
  for (const auto& tr : r.trajectories) expected += tr.samples.size() * 4;
  EXPECT_EQ(rows, expected);

  std::stringstream trials;
  TrialRecord rec{"cylinder", "front", 0, 1, r};
  rec.result.failure_reason = "contact: a, \"b\"";
  write_trials_csv(trials, {rec});
  std::getline(trials, header);
  std::string row;
  std::getline(trials, row);
  EXPECT_NE(row.find(",\"contact: a, \"\"b\"\"\""), std::string::npos) << row;
}
