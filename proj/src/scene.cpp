#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "graspkit/error.hpp"
#include "graspkit/pipeline.hpp"

namespace graspkit {
namespace {

constexpr double kPi = std::numbers::pi;

Vec3 half_size(const ObjectShape& s) { return 0.5 * s.size; }

// Entry interval of the ray into the infinite cylinder x^2 + y^2 <= R^2.
bool cylinder_interval(const Point3& o, const Vec3& d, double r, double& lo, double& hi) {
  const double a = d.x() * d.x() + d.y() * d.y();
  const double b = o.x() * d.x() + o.y() * d.y();
  const double c = o.x() * o.x() + o.y() * o.y() - r * r;
  if (a == 0.0) {
    if (c > 0.0) return false;
    lo = -std::numeric_limits<double>::infinity();
    hi = std::numeric_limits<double>::infinity();
    return true;
  }
  const double disc = b * b - a * c;
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  lo = (-b - s) / a;
  hi = (-b + s) / a;
  return true;
}

}  // namespace

std::string_view to_string(ObjectKind k) {
  return k == ObjectKind::kCylinder ? "cylinder" : "block";
}

ObjectKind object_kind_from_string(std::string_view s) {
  if (s == "cylinder") return ObjectKind::kCylinder;
  if (s == "block") return ObjectKind::kBlock;
  throw Error(Errc::kValidationError, "type must be \"cylinder\" or \"block\"");
}

double ObjectShape::signed_distance(const Point3& p) const {
  if (kind == ObjectKind::kCylinder) {
    const double dr = std::hypot(p.x(), p.y()) - radius;
    const double dz = std::abs(p.z()) - 0.5 * height;
    return std::min(std::max(dr, dz), 0.0) + std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
  }
  const Vec3 q = p.cwiseAbs() - half_size(*this);
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Vec3 ObjectShape::normal(const Point3& p) const {
  if (kind == ObjectKind::kCylinder) {
    const double rho = std::hypot(p.x(), p.y());
    const double dr = rho - radius;
    const double dz = std::abs(p.z()) - 0.5 * height;
    const Vec3 radial = rho > 0 ? Vec3(p.x() / rho, p.y() / rho, 0.0) : Vec3::UnitX();
    const Vec3 axial(0.0, 0.0, p.z() >= 0 ? 1.0 : -1.0);
    if (dr > 0 && dz > 0) return (dr * radial + dz * axial).normalized();
    return dr >= dz ? radial : axial;
  }
  const Vec3 q = p.cwiseAbs() - half_size(*this);
  const Vec3 sign(p.x() >= 0 ? 1.0 : -1.0, p.y() >= 0 ? 1.0 : -1.0, p.z() >= 0 ? 1.0 : -1.0);
  if ((q.array() > 0).any()) return q.cwiseMax(0.0).cwiseProduct(sign).normalized();
  Eigen::Index axis;
  q.maxCoeff(&axis);
  Vec3 n = Vec3::Zero();
  n[axis] = sign[axis];
  return n;
}

std::optional<double> ObjectShape::ray_entry(const Point3& o, const Vec3& d) const {
  if (kind == ObjectKind::kBlock) {
    const auto hit = ray_aabb(Ray{o, d}, local_bounds());
    if (!hit) return std::nullopt;
    return std::max(hit->t_enter, 0.0);
  }
  double lo, hi;
  if (!cylinder_interval(o, d, radius, lo, hi)) return std::nullopt;
  const double h = 0.5 * height;
  if (d.z() == 0.0) {
    if (std::abs(o.z()) > h) return std::nullopt;
  } else {
    double z0 = (-h - o.z()) / d.z(), z1 = (h - o.z()) / d.z();
    if (z0 > z1) std::swap(z0, z1);
    lo = std::max(lo, z0);
    hi = std::min(hi, z1);
  }
  if (lo > hi || hi < 0.0) return std::nullopt;
  return std::max(lo, 0.0);
}

Aabb ObjectShape::local_bounds() const {
  const Vec3 h = kind == ObjectKind::kCylinder ? Vec3(radius, radius, 0.5 * height) : half_size(*this);
  return Aabb{-h, h};
}

double ObjectShape::surface_area() const {
  if (kind == ObjectKind::kCylinder) return 2 * kPi * radius * height + 2 * kPi * radius * radius;
  return 2 * (size.x() * size.y() + size.y() * size.z() + size.x() * size.z());
}

double ObjectShape::volume() const {
  if (kind == ObjectKind::kCylinder) return kPi * radius * radius * height;
  return size.prod();
}

std::string_view to_string(CameraPreset p) {
  switch (p) {
    case CameraPreset::kFront: return "front";
    case CameraPreset::kWrist: return "wrist";
    case CameraPreset::kTop: return "top";
    case CameraPreset::kExperimental: return "experimental";
  }
  return "front";
}

CameraPreset camera_preset_from_string(std::string_view s) {
  for (auto p : {CameraPreset::kFront, CameraPreset::kWrist, CameraPreset::kTop, CameraPreset::kExperimental}) {
    if (to_string(p) == s) return p;
  }
  throw Error(Errc::kValidationError,
              "camera must be one of front, wrist, top, experimental, custom");
}

// Each preset sees three mutually orthogonal faces of an object centred below
// the palm, so the box of the visible surface spans the whole object.
Point3 camera_preset_position(CameraPreset p) {
  switch (p) {
    case CameraPreset::kFront: return {0.40, -0.20, 0.15};
    case CameraPreset::kWrist: return {-0.35, 0.20, 0.12};
    case CameraPreset::kTop: return {0.15, -0.20, 0.45};
    case CameraPreset::kExperimental: return {0.40, 0.0, 0.70};
  }
  return {0.40, -0.20, 0.15};
}

SceneConfig SceneConfig::preset(ObjectKind kind, CameraPreset camera, std::uint64_t seed) {
  SceneConfig c;
  c.object.kind = kind;
  c.object_pose.translation = Point3(0.0, 0.0, -0.09);
  // Cylinder lies on its side with the axis along palm y.
  if (kind == ObjectKind::kCylinder) c.object_pose.rotation = rotation_about(Vec3::UnitX(), -kPi / 2);
  c.camera = std::string(to_string(camera));
  c.camera_position = camera_preset_position(camera);
  c.rng_seed = seed;
  return c;
}

void SceneConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(Errc::kValidationError, m); };
  if (object.kind == ObjectKind::kCylinder) {
    if (!(object.radius > 0)) bad("radius must be > 0");
    if (!(object.height > 0)) bad("height must be > 0");
  } else if (!(object.size.array() > 0).all()) {
    bad("size must be > 0 in every axis");
  }
  if (!object_pose.is_valid()) bad("pose is not a rigid transform");
  if (!camera_position.allFinite()) bad("camera_position must be finite");
  if (camera_samples < 1) bad("camera_samples must be >= 1");
  if (!(noise_sigma >= 0)) bad("noise_sigma must be >= 0");
  if (!(outlier_fraction >= 0 && outlier_fraction < 0.5)) bad("outlier_fraction must be in [0, 0.5)");
  if (!(plane_half_extent > 0)) bad("plane_half_extent must be > 0");
}

double SceneTruth::signed_distance(const Point3& palm) const {
  return object.signed_distance(object_pose.inverse().apply(palm));
}

Scene synthesize_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  SceneTruth& truth = scene.truth;
  truth.object = cfg.object;
  truth.object_pose = cfg.object_pose;
  truth.aabb = transform_aabb(cfg.object_pose, cfg.object.local_bounds());
  truth.centroid = cfg.object_pose.translation;
  if (truth.signed_distance(cfg.camera_position) <= 0.0) {
    throw Error(Errc::kInvalidScene, "camera is inside or on the object");
  }
  scene.camera_position = cfg.camera_position;

  const RigidTransform local_from_palm = cfg.object_pose.inverse();
  const Point3 cam_local = local_from_palm.apply(cfg.camera_position);
  // Visible iff the first entry into the solid along the camera ray is the
  // sample itself.
  auto visible_local = [&](const Point3& p) {
    const Vec3 v = p - cam_local;
    const double dist = v.norm();
    const auto entry = cfg.object.ray_entry(cam_local, v / dist);
    return !entry || *entry >= dist - 1e-7;
  };

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Point3> points;
  std::vector<std::int32_t> labels;

  const ObjectShape& s = cfg.object;
  const double area = s.surface_area();
  for (int i = 0; i < cfg.camera_samples; ++i) {
    Point3 p;
    double pick = u(rng) * area;
    if (s.kind == ObjectKind::kCylinder) {
      const double side = 2 * kPi * s.radius * s.height;
      const double a = 2 * kPi * u(rng);
      if (pick < side) {
        p = Point3(s.radius * std::cos(a), s.radius * std::sin(a), s.height * (u(rng) - 0.5));
      } else {
        const double rr = s.radius * std::sqrt(u(rng));
        p = Point3(rr * std::cos(a), rr * std::sin(a), pick < side + 0.5 * (area - side) ? -0.5 * s.height : 0.5 * s.height);
      }
    } else {
      const Vec3 h = half_size(s);
      const double faces[3] = {s.size.y() * s.size.z(), s.size.x() * s.size.z(), s.size.x() * s.size.y()};
      int axis = 0;
      pick *= 0.5;  // pick in [0, area / 2): choose an axis by face-pair area
      while (axis < 2 && pick >= faces[axis]) pick -= faces[axis++];
      p = Point3(h.x() * (2 * u(rng) - 1), h.y() * (2 * u(rng) - 1), h.z() * (2 * u(rng) - 1));
      p[axis] = u(rng) < 0.5 ? -h[axis] : h[axis];
    }
    if (!visible_local(p)) continue;
    points.push_back(cfg.object_pose.apply(p));
    labels.push_back(static_cast<std::int32_t>(PointLabel::kObject));
  }

  if (cfg.plane) {
    const double z = truth.aabb.min.z();
    truth.plane_z = z;
    const double e = cfg.plane_half_extent;
    const int n = static_cast<int>(std::lround(cfg.camera_samples * 4 * e * e / area));
    const bool above = cfg.camera_position.z() > z;
    for (int i = 0; i < n; ++i) {
      const Point3 p(truth.centroid.x() + e * (2 * u(rng) - 1), truth.centroid.y() + e * (2 * u(rng) - 1), z);
      if (!above) continue;
      const Vec3 v = p - cfg.camera_position;
      const double dist = v.norm();
      const auto entry = s.ray_entry(cam_local, local_from_palm.rotation * (v / dist));
      if (entry && *entry < dist - 1e-7) continue;
      points.push_back(p);
      labels.push_back(static_cast<std::int32_t>(PointLabel::kPlane));
    }
  }

  if (cfg.noise_sigma > 0) {
    for (auto& p : points) p += cfg.noise_sigma * Vec3(g(rng), g(rng), g(rng));
  }

  const auto n_out = static_cast<std::size_t>(
      std::llround(cfg.outlier_fraction * static_cast<double>(points.size()) / (1.0 - cfg.outlier_fraction)));
  const Aabb clutter = inflate(truth.aabb, 0.1);
  const Vec3 span = clutter.max - clutter.min;
  for (std::size_t i = 0; i < n_out; ++i) {
    points.push_back(clutter.min + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(span));
    labels.push_back(static_cast<std::int32_t>(PointLabel::kOutlier));
  }

  // Camera frame: z toward the object centre, x horizontal.
  const Vec3 look = (truth.centroid - cfg.camera_position).normalized();
  Vec3 x = look.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = look.cross(x);
  r.col(2) = look;
  scene.palm_from_camera = RigidTransform{r, cfg.camera_position};
  const RigidTransform camera_from_palm = scene.palm_from_camera.inverse();
  scene.cloud.points.reserve(points.size());
  for (const auto& p : points) scene.cloud.points.push_back(camera_from_palm.apply(p));
  scene.cloud.labels = std::move(labels);
  return scene;
}

}  // namespace graspkit
