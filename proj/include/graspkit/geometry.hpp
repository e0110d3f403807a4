#pragma once

#include <array>
#include <optional>
#include <span>

#include <Eigen/Geometry>

#include "graspkit/types.hpp"

namespace graspkit {

/// Closed axis-aligned box stored as coordinate extrema.
///
/// The center/half-extents view is derived on demand; both views describe the
/// same set { x : |x - c| <= h } with c = (min + max) / 2, h = (max - min) / 2.
struct Aabb {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Zero();

  /// Throws kInvalidArgument unless min <= max componentwise and finite.
  static Aabb from_min_max(const Point3& min, const Point3& max);
  /// Throws kInvalidArgument if any half-extent is negative.
  static Aabb from_center_half_extents(const Point3& center, const Vec3& half);

  bool valid() const;
  bool contains(const Point3& p) const;
  bool contains(const Aabb& other) const;
  Aabb merged(const Aabb& other) const;
  Aabb merged(const Point3& p) const;
  std::array<Point3, 8> corners() const;
};

struct CenterHalfExtents {
  Point3 center;
  Vec3 half;
};

struct Ray {
  Point3 origin;
  Vec3 direction;  // non-zero, need not be unit length
};

struct RayHit {
  double t_enter;
  double t_exit;
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t);
  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& t = Vec3::Zero());
  /// Row-major rotation followed by translation (12 reals).
  static RigidTransform from_row_major(std::span<const double, 12> values);
  std::array<double, 12> to_row_major() const;

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
  Vec3 apply_vector(const Vec3& v) const { return rotation * v; }
  RigidTransform inverse() const;
  Eigen::Matrix4d matrix() const;

  /// R^T R = I and det R = +1 within `tol`.
  bool is_valid(double tol = kExactTol) const;

  friend RigidTransform operator*(const RigidTransform& a,
                                  const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  }
};

enum class TransformMode {
  kCornerRefit,   // refit around the 8 transformed corners (contains the image)
  kExtremaOnly,   // transform p_min and p_max only, then re-sort
};

// --- box construction and measures --------------------------------------

/// Coordinate-wise extrema of the cloud. Throws kEmptyInput on an empty span.
Aabb aabb_from_points(std::span<const Point3> points);
Aabb aabb_from_points(const PointCloud& cloud);

/// Per axis, the order statistics at rank floor(fraction * (n - 1)) from each
/// end. fraction = 0 gives aabb_from_points. Throws kEmptyInput on an empty
/// span and kInvalidArgument unless 0 <= fraction < 0.5.
Aabb trimmed_aabb(std::span<const Point3> points, double fraction);

CenterHalfExtents center_half_extents(const Aabb& box);
Vec3 edge_lengths(const Aabb& box);
double volume(const Aabb& box);
double surface_area(const Aabb& box);

/// Grows every half-extent by `r` (r >= 0, else kInvalidArgument).
Aabb inflate(const Aabb& box, double r);

// --- queries ------------------------------------------------------------

/// Slab test. An axis with zero direction contributes (-inf, +inf) when the
/// origin lies inside that slab and a miss otherwise. Hit iff
/// t_enter <= t_exit and t_exit >= 0.
std::optional<RayHit> ray_aabb(const Ray& ray, const Aabb& box);

/// |c_A - c_B| <= h_A + h_B on every axis; touching boxes overlap.
bool aabb_overlap(const Aabb& a, const Aabb& b);

double point_aabb_distance_sq(const Point3& p, const Aabb& box);
double point_aabb_distance(const Point3& p, const Aabb& box);
double aabb_aabb_distance_sq(const Aabb& a, const Aabb& b);

Aabb transform_aabb(const RigidTransform& t, const Aabb& box,
                    TransformMode mode = TransformMode::kCornerRefit);

// --- rotations ----------------------------------------------------------

Mat3 rotation_about(const Vec3& axis, double angle);
/// Rotation vector (axis * angle) of R, angle in [0, pi].
Vec3 rotation_log(const Mat3& r);

}  // namespace graspkit
