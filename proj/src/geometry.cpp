#include "graspkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "graspkit/error.hpp"
#include "graspkit/simd/kernels.hpp"

namespace graspkit {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kEmptyAfterPreprocess: return "EmptyAfterPreprocess";
    case Errc::kIndexOutOfRange: return "IndexOutOfRange";
    case Errc::kInsufficientPoints: return "InsufficientPoints";
    case Errc::kDimensionError: return "DimensionError";
    case Errc::kNoTrajectoryFound: return "NoTrajectoryFound";
    case Errc::kNoCandidates: return "NoCandidates";
    case Errc::kPreconditionViolation: return "PreconditionViolation";
    case Errc::kInvalidScene: return "InvalidScene";
    case Errc::kParseError: return "ParseError";
    case Errc::kValidationError: return "ValidationError";
  }
  return "Unknown";
}

Aabb Aabb::from_min_max(const Point3& min, const Point3& max) {
  Aabb box{min, max};
  if (!box.valid()) {
    throw Error(Errc::kInvalidArgument, "Aabb requires finite min <= max");
  }
  return box;
}

Aabb Aabb::from_center_half_extents(const Point3& center, const Vec3& half) {
  if ((half.array() < 0.0).any()) {
    throw Error(Errc::kInvalidArgument, "negative half-extent");
  }
  return from_min_max(center - half, center + half);
}

bool Aabb::valid() const {
  return min.allFinite() && max.allFinite() && (min.array() <= max.array()).all();
}

bool Aabb::contains(const Point3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

bool Aabb::contains(const Aabb& other) const {
  return contains(other.min) && contains(other.max);
}

Aabb Aabb::merged(const Aabb& other) const {
  return {min.cwiseMin(other.min), max.cwiseMax(other.max)};
}

Aabb Aabb::merged(const Point3& p) const {
  return {min.cwiseMin(p), max.cwiseMax(p)};
}

std::array<Point3, 8> Aabb::corners() const {
  std::array<Point3, 8> out;
  for (int i = 0; i < 8; ++i) {
    out[i] = Point3((i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(),
                    (i & 4) ? max.z() : min.z());
  }
  return out;
}

RigidTransform RigidTransform::from_translation(const Vec3& t) {
  return {Mat3::Identity(), t};
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle,
                                               const Vec3& t) {
  return {rotation_about(axis, angle), t};
}

RigidTransform RigidTransform::from_row_major(std::span<const double, 12> v) {
  RigidTransform out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.rotation(r, c) = v[r * 3 + c];
  }
  out.translation = Vec3(v[9], v[10], v[11]);
  return out;
}

std::array<double, 12> RigidTransform::to_row_major() const {
  std::array<double, 12> v{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[r * 3 + c] = rotation(r, c);
  }
  v[9] = translation.x();
  v[10] = translation.y();
  v[11] = translation.z();
  return v;
}

RigidTransform RigidTransform::inverse() const {
  Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

Aabb aabb_from_points(std::span<const Point3> points) {
  if (points.empty()) {
    throw Error(Errc::kEmptyInput, "aabb_from_points on empty cloud");
  }
  const auto ext = simd::extrema(points);
  return {ext.min, ext.max};
}

Aabb aabb_from_points(const PointCloud& cloud) {
  return aabb_from_points(std::span<const Point3>(cloud.points));
}

Aabb trimmed_aabb(std::span<const Point3> points, double fraction) {
  if (points.empty()) throw Error(Errc::kEmptyInput, "trimmed_aabb on empty cloud");
  if (!(fraction >= 0.0 && fraction < 0.5)) {
    throw Error(Errc::kInvalidArgument, "trim fraction must be in [0, 0.5)");
  }
  if (fraction == 0.0) return aabb_from_points(points);
  const std::size_t n = points.size();
  const auto lo = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n - 1)));
  const std::size_t hi = n - 1 - lo;
  Aabb box;
  std::vector<double> v(n);
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < n; ++i) v[i] = points[i][a];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    box.min[a] = v[lo];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(hi), v.end());
    box.max[a] = v[hi];
  }
  return box;
}

CenterHalfExtents center_half_extents(const Aabb& box) {
  return {(box.min + box.max) * 0.5, (box.max - box.min) * 0.5};
}

Vec3 edge_lengths(const Aabb& box) { return box.max - box.min; }

double volume(const Aabb& box) {
  const Vec3 l = edge_lengths(box);
  return l.x() * l.y() * l.z();
}

double surface_area(const Aabb& box) {
  const Vec3 l = edge_lengths(box);
  return 2.0 * (l.x() * l.y() + l.y() * l.z() + l.z() * l.x());
}

Aabb inflate(const Aabb& box, double r) {
  if (!(r >= 0.0)) {
    throw Error(Errc::kInvalidArgument, "inflate radius must be >= 0");
  }
  const Vec3 pad = Vec3::Constant(r);
  return {box.min - pad, box.max + pad};
}

std::optional<RayHit> ray_aabb(const Ray& ray, const Aabb& box) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double t_enter = -kInf;
  double t_exit = kInf;
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (d == 0.0) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    const double t1 = (box.min[a] - o) / d;
    const double t2 = (box.max[a] - o) / d;
    t_enter = std::max(t_enter, std::min(t1, t2));
    t_exit = std::min(t_exit, std::max(t1, t2));
  }
  if (t_enter <= t_exit && t_exit >= 0.0) return RayHit{t_enter, t_exit};
  return std::nullopt;
}

bool aabb_overlap(const Aabb& a, const Aabb& b) {
  const auto ca = center_half_extents(a);
  const auto cb = center_half_extents(b);
  for (int i = 0; i < 3; ++i) {
    if (std::abs(ca.center[i] - cb.center[i]) > ca.half[i] + cb.half[i]) {
      return false;
    }
  }
  return true;
}

double point_aabb_distance_sq(const Point3& p, const Aabb& box) {
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = std::max(std::max(box.min[a] - p[a], 0.0), p[a] - box.max[a]);
    sum += d * d;
  }
  return sum;
}

double point_aabb_distance(const Point3& p, const Aabb& box) {
  return std::sqrt(point_aabb_distance_sq(p, box));
}

double aabb_aabb_distance_sq(const Aabb& a, const Aabb& b) {
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d =
        std::max(std::max(a.min[i] - b.max[i], 0.0), b.min[i] - a.max[i]);
    sum += d * d;
  }
  return sum;
}

Aabb transform_aabb(const RigidTransform& t, const Aabb& box, TransformMode mode) {
  if (mode == TransformMode::kExtremaOnly) {
    const Point3 a = t.apply(box.min);
    const Point3 b = t.apply(box.max);
    return {a.cwiseMin(b), a.cwiseMax(b)};
  }
  const auto corners = box.corners();
  Aabb out{t.apply(corners[0]), t.apply(corners[0])};
  for (std::size_t i = 1; i < corners.size(); ++i) out = out.merged(t.apply(corners[i]));
  return out;
}

Mat3 rotation_about(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Vec3 rotation_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

}  // namespace graspkit
