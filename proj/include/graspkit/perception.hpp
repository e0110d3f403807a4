#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "graspkit/bvh.hpp"
#include "graspkit/geometry.hpp"
#include "graspkit/types.hpp"

namespace graspkit {

struct PreprocessConfig {
  int outlier_k = 16;
  double outlier_stddev = 2.0;
  double plane_distance_threshold = 0.005;
  int plane_iterations = 200;
  // A plane is only removed when it holds at least this fraction of the
  // cropped, outlier-free cloud.
  double plane_min_inlier_fraction = 0.15;
  bool remove_plane = true;
  Aabb crop_box = Aabb{Point3::Constant(-1.0), Point3::Constant(1.0)};
  std::uint64_t rng_seed = 1;

  /// Throws kValidationError when outlier_k < 3 or a threshold is not > 0.
  void validate() const;
};

enum class RemovalReason : std::int32_t {
  kKept = 0,
  kOutsideCrop = 1,
  kOutlier = 2,
  kPlane = 3,
};

struct PreprocessResult {
  PointCloud cloud;                         // kept points, input labels carried over
  std::vector<std::uint32_t> kept_indices;  // into the input cloud, ascending
  std::vector<RemovalReason> reasons;       // one per input point
  std::optional<Eigen::Vector4d> plane;     // n.x, n.y, n.z, d with n.p = d
};

/// Crop to the workspace, remove the single dominant RANSAC plane, then drop
/// statistical outliers (which also catches stragglers the plane fit missed). Throws kEmptyInput for an empty input and
/// kEmptyAfterPreprocess when nothing survives.
PreprocessResult preprocess(const PointCloud& cloud, const PreprocessConfig& cfg);

/// Connected component of the radius graph containing `seed`, ascending.
/// Throws kIndexOutOfRange for a bad seed, kInvalidArgument for radius <= 0.
std::vector<std::uint32_t> segment_region_growing(const Bvh& bvh, std::size_t seed,
                                                  double radius);
std::vector<std::uint32_t> segment_region_growing(const PointCloud& cloud,
                                                  std::size_t seed, double radius);

/// Index of the point closest to `target` that has at least `min_neighbors`
/// other points within `radius`; falls back to the plain nearest point.
std::size_t default_seed(const Bvh& bvh, const Point3& target, double radius,
                         std::size_t min_neighbors);

struct NormalField {
  std::vector<Vec3> normals;
  int k = 0;
};

/// Smallest-eigenvector of each point's k-NN covariance (the point itself
/// included), flipped so that n . (camera - p) >= 0. Throws
/// kInvalidArgument for k < 3 and kInsufficientPoints when n < k.
NormalField estimate_normals(const Bvh& bvh, int k, const Point3& camera);
NormalField estimate_normals(const PointCloud& cloud, int k, const Point3& camera);

/// One projection pass of each point onto the least-squares plane of its k
/// nearest neighbours (itself included). Order and count are preserved.
/// Throws kInvalidArgument for k < 3 and kInsufficientPoints when n < k.
std::vector<Point3> smooth_points(const Bvh& bvh, int k);

/// 100 |predicted ∩ truth| / |truth|. With an empty truth set the result is
/// 100 if predicted is also empty and 0 otherwise. Inputs need not be sorted.
double segmentation_accuracy(std::vector<std::uint32_t> predicted,
                             std::vector<std::uint32_t> truth);

}  // namespace graspkit
