#pragma once

#include <span>

#include "graspkit/geometry.hpp"
#include "graspkit/types.hpp"

namespace graspkit {

/// Sign of det[b - a, c - a, d - a]: positive when d lies on the side of
/// plane abc that (b - a) x (c - a) points toward. Near-zero determinants are
/// re-evaluated in exact rational arithmetic.
int orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// Volume of the 3D convex hull. Returns 0 when the points span fewer than
/// three dimensions (including the empty and single-point cases).
double convex_hull_volume(std::span<const Point3> points);
double convex_hull_volume(const PointCloud& cloud);

struct EmptySpaceRatio {
  double eta = 1.0;         // 1 - V_hull / V_box, clamped to [0, 1]
  bool degenerate = false;  // V_box == 0
  double hull_volume = 0.0;
  double box_volume = 0.0;
};

/// `box` is expected to be aabb_from_points(cloud). Throws kEmptyInput on an
/// empty cloud.
EmptySpaceRatio empty_space_ratio(const PointCloud& cloud, const Aabb& box);

}  // namespace graspkit
