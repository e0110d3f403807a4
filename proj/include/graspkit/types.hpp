#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace graspkit {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Absolute tolerance used for exact-arithmetic-style comparisons.
inline constexpr double kExactTol = 1e-9;

/// Per-point label carried by clouds produced by the scene generator and the
/// preprocessing stage. Values are written verbatim into PLY/CSV files.
enum class PointLabel : std::int32_t {
  kObject = 0,
  kPlane = 1,
  kOutlier = 2,
};

struct PointCloud {
  std::vector<Point3> points;
  // Empty, or exactly one label per point.
  std::vector<std::int32_t> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty(); }
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace graspkit
