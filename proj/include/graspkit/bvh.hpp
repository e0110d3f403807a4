#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "graspkit/geometry.hpp"
#include "graspkit/simd/kernels.hpp"
#include "graspkit/types.hpp"

namespace graspkit {

/// Binary hierarchy of tight AABBs over the points of a cloud.
///
/// Built once by median splits along the longest axis and immutable afterwards;
/// all queries are const and safe to run concurrently. The tree keeps its own
/// copy of the points, permuted so that every leaf is a contiguous SoA range,
/// and reports results in terms of the original cloud indices. Leaf ranges are
/// stored in ascending original-index order, which makes "first minimum in the
/// leaf" coincide with the lowest-index tie rule.
class Bvh {
 public:
  static constexpr std::size_t kDefaultLeafCapacity = 16;
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct Node {
    Aabb box;
    std::uint32_t left = kNone;   // child node ids, kNone for leaves
    std::uint32_t right = kNone;
    std::uint32_t begin = 0;      // leaf range into point_index()
    std::uint32_t end = 0;
    bool is_leaf() const { return left == kNone; }
  };

  struct Hit {
    std::size_t index = 0;  // original cloud index
    double distance = 0.0;
  };

  struct QueryStats {
    std::size_t nodes_visited = 0;
    std::size_t points_tested = 0;
  };

  Bvh() = default;

  /// Throws kEmptyInput for an empty cloud and kInvalidArgument for
  /// leaf_capacity == 0.
  static Bvh build(std::span<const Point3> points,
                   std::size_t leaf_capacity = kDefaultLeafCapacity);
  static Bvh build(const PointCloud& cloud,
                   std::size_t leaf_capacity = kDefaultLeafCapacity);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::size_t leaf_capacity() const { return leaf_capacity_; }
  std::size_t depth() const { return depth_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& point_index() const { return perm_; }
  const std::vector<Point3>& points() const { return points_; }
  const Point3& point(std::size_t original_index) const { return points_[original_index]; }
  const Aabb& bounds() const { return nodes_.front().box; }

  /// Closest point; ties go to the lowest original index.
  Hit nearest(const Point3& q, QueryStats* stats = nullptr) const;

  /// Closest point whose original index passes `keep`. Returns nullopt-like
  /// Hit with index == SIZE_MAX when nothing passes.
  template <typename Pred>
  Hit nearest_if(const Point3& q, Pred&& keep) const;

  /// k closest points sorted by (distance, index).
  std::vector<Hit> knn(const Point3& q, std::size_t k) const;

  /// Original indices of all points with |p - q| <= r, ascending.
  std::vector<std::uint32_t> radius(const Point3& q, double r) const;

  bool any_within(const Point3& q, double r) const;

  /// min over points of the point-to-box distance (0 if a point is inside).
  double distance(const Aabb& box) const;
  /// True iff some point lies in the closed box (distance(box) == 0).
  bool collides(const Aabb& box) const;

  /// Structural audit: parent containment, exact leaf partition, leaf size
  /// bound, and node boxes containing their points. Returns an empty string
  /// when the tree is sound, else the first violation found.
  std::string audit() const;

 private:
  std::uint32_t build_node(std::uint32_t begin, std::uint32_t end, std::size_t level);
  Aabb box_of(std::uint32_t begin, std::uint32_t end) const;
  simd::SoaView leaf_view(const Node& n) const {
    return soa_.view().subview(n.begin, n.end);
  }

  std::vector<Point3> points_;        // original order
  std::vector<std::uint32_t> perm_;   // tree order -> original index
  simd::SoaPoints soa_;               // tree order
  std::vector<Node> nodes_;           // nodes_[0] is the root
  std::size_t leaf_capacity_ = kDefaultLeafCapacity;
  std::size_t depth_ = 0;
};

template <typename Pred>
Bvh::Hit Bvh::nearest_if(const Point3& q, Pred&& keep) const {
  Hit best{static_cast<std::size_t>(-1), std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (point_aabb_distance_sq(q, n.box) > best_sq) continue;
    if (n.is_leaf()) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t orig = perm_[i];
        if (!keep(orig)) continue;
        const double dx = soa_.x[i] - q.x();
        const double dy = soa_.y[i] - q.y();
        const double dz = soa_.z[i] - q.z();
        const double d = (dx * dx + dy * dy) + dz * dz;
        if (d < best_sq || (d == best_sq && orig < best.index)) {
          best_sq = d;
          best.index = orig;
        }
      }
      continue;
    }
    stack.push_back(n.left);
    stack.push_back(n.right);
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

}  // namespace graspkit
