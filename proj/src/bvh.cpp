#include "graspkit/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "graspkit/error.hpp"

namespace graspkit {

Bvh Bvh::build(const PointCloud& cloud, std::size_t leaf_capacity) {
  return build(std::span<const Point3>(cloud.points), leaf_capacity);
}

Bvh Bvh::build(std::span<const Point3> points, std::size_t leaf_capacity) {
  if (points.empty()) throw Error(Errc::kEmptyInput, "Bvh::build on empty cloud");
  if (leaf_capacity == 0) throw Error(Errc::kInvalidArgument, "leaf_capacity must be >= 1");
  Bvh bvh;
  bvh.leaf_capacity_ = leaf_capacity;
  bvh.points_.assign(points.begin(), points.end());
  bvh.perm_.resize(points.size());
  for (std::uint32_t i = 0; i < bvh.perm_.size(); ++i) bvh.perm_[i] = i;
  bvh.nodes_.reserve(2 * (points.size() / leaf_capacity + 1));
  bvh.build_node(0, static_cast<std::uint32_t>(points.size()), 0);

  std::vector<Point3> ordered;
  ordered.reserve(points.size());
  for (std::uint32_t i : bvh.perm_) ordered.push_back(bvh.points_[i]);
  bvh.soa_ = simd::SoaPoints(ordered);
  return bvh;
}

Aabb Bvh::box_of(std::uint32_t begin, std::uint32_t end) const {
  Aabb box{points_[perm_[begin]], points_[perm_[begin]]};
  for (std::uint32_t i = begin + 1; i < end; ++i) box = box.merged(points_[perm_[i]]);
  return box;
}

std::uint32_t Bvh::build_node(std::uint32_t begin, std::uint32_t end, std::size_t level) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{box_of(begin, end)});
  depth_ = std::max(depth_, level);
  if (end - begin <= leaf_capacity_) {
    std::sort(perm_.begin() + begin, perm_.begin() + end);
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  const Vec3 extent = edge_lengths(nodes_[id].box);
  int axis = 0;
  if (extent.y() > extent[axis]) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  const std::uint32_t mid = begin + (end - begin) / 2;
  // (coordinate, index) keys make the split fully determined, including the
  // all-identical case where it degenerates to an index-balanced split.
  std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = points_[a][axis];
                     const double cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::uint32_t left = build_node(begin, mid, level + 1);
  const std::uint32_t right = build_node(mid, end, level + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  return id;
}

Bvh::Hit Bvh::nearest(const Point3& q, QueryStats* stats) const {
  std::size_t best_index = static_cast<std::size_t>(-1);
  double best_sq = std::numeric_limits<double>::infinity();
  // (lower bound, node) pairs; nearer child is pushed last so it pops first.
  std::vector<std::pair<double, std::uint32_t>> stack;
  stack.reserve(64);
  stack.push_back({point_aabb_distance_sq(q, nodes_[0].box), 0});
  while (!stack.empty()) {
    const auto [bound, id] = stack.back();
    stack.pop_back();
    if (bound > best_sq) continue;
    const Node& n = nodes_[id];
    if (stats != nullptr) ++stats->nodes_visited;
    if (n.is_leaf()) {
      const simd::Nearest hit = simd::nearest(leaf_view(n), q);
      if (stats != nullptr) stats->points_tested += n.end - n.begin;
      const std::size_t orig = perm_[n.begin + hit.index];
      if (hit.dist_sq < best_sq || (hit.dist_sq == best_sq && orig < best_index)) {
        best_sq = hit.dist_sq;
        best_index = orig;
      }
      continue;
    }
    const double dl = point_aabb_distance_sq(q, nodes_[n.left].box);
    const double dr = point_aabb_distance_sq(q, nodes_[n.right].box);
    if (dl <= dr) {
      if (dr <= best_sq) stack.push_back({dr, n.right});
      if (dl <= best_sq) stack.push_back({dl, n.left});
    } else {
      if (dl <= best_sq) stack.push_back({dl, n.left});
      if (dr <= best_sq) stack.push_back({dr, n.right});
    }
  }
  return {best_index, std::sqrt(best_sq)};
}

std::vector<Bvh::Hit> Bvh::knn(const Point3& q, std::size_t k) const {
  std::vector<Hit> out;
  if (k == 0) return out;
  using Entry = std::pair<double, std::size_t>;  // (dist_sq, index), max-heap
  std::priority_queue<Entry> heap;
  std::vector<double> scratch(leaf_capacity_);
  std::vector<std::pair<double, std::uint32_t>> stack{{0.0, 0}};
  auto worst = [&] {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().first;
  };
  while (!stack.empty()) {
    const auto [bound, id] = stack.back();
    stack.pop_back();
    if (bound > worst()) continue;
    const Node& n = nodes_[id];
    if (n.is_leaf()) {
      const std::size_t count = n.end - n.begin;
      simd::distances_sq(leaf_view(n), q, std::span<double>(scratch.data(), count));
      for (std::size_t i = 0; i < count; ++i) {
        const Entry e{scratch[i], perm_[n.begin + i]};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      continue;
    }
    const double dl = point_aabb_distance_sq(q, nodes_[n.left].box);
    const double dr = point_aabb_distance_sq(q, nodes_[n.right].box);
    if (dl <= dr) {
      stack.push_back({dr, n.right});
      stack.push_back({dl, n.left});
    } else {
      stack.push_back({dl, n.left});
      stack.push_back({dr, n.right});
    }
  }
  out.resize(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().second, std::sqrt(heap.top().first)};
    heap.pop();
  }
  return out;
}

std::vector<std::uint32_t> Bvh::radius(const Point3& q, double r) const {
  std::vector<std::uint32_t> local;
  const double r_sq = r * r;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (point_aabb_distance_sq(q, n.box) > r_sq) continue;
    if (n.is_leaf()) {
      simd::collect_within(leaf_view(n), q, r_sq, n.begin, local);
      continue;
    }
    stack.push_back(n.right);
    stack.push_back(n.left);
  }
  for (auto& i : local) i = perm_[i];
  std::sort(local.begin(), local.end());
  return local;
}

bool Bvh::any_within(const Point3& q, double r) const {
  const double r_sq = r * r;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (point_aabb_distance_sq(q, n.box) > r_sq) continue;
    if (n.is_leaf()) {
      if (simd::any_within(leaf_view(n), q, r_sq)) return true;
      continue;
    }
    stack.push_back(n.right);
    stack.push_back(n.left);
  }
  return false;
}

double Bvh::distance(const Aabb& box) const {
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty() && best_sq > 0.0) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (aabb_aabb_distance_sq(n.box, box) >= best_sq) continue;
    if (n.is_leaf()) {
      best_sq = std::min(best_sq, simd::min_box_distance_sq(leaf_view(n), box));
      continue;
    }
    const double dl = aabb_aabb_distance_sq(nodes_[n.left].box, box);
    const double dr = aabb_aabb_distance_sq(nodes_[n.right].box, box);
    if (dl <= dr) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return std::sqrt(best_sq);
}

bool Bvh::collides(const Aabb& box) const {
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (!aabb_overlap(n.box, box)) continue;
    if (n.is_leaf()) {
      if (simd::min_box_distance_sq(leaf_view(n), box) == 0.0) return true;
      continue;
    }
    stack.push_back(n.right);
    stack.push_back(n.left);
  }
  return false;
}

std::string Bvh::audit() const {
  std::ostringstream why;
  if (nodes_.empty()) return "no nodes";
  std::vector<int> covered(points_.size(), 0);
  std::vector<std::uint32_t> stack{0};
  std::size_t seen_nodes = 0;
  while (!stack.empty()) {
    const std::uint32_t id = stack.back();
    stack.pop_back();
    ++seen_nodes;
    const Node& n = nodes_[id];
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      if (!n.box.contains(points_[perm_[i]])) {
        why << "node " << id << " box misses point " << perm_[i];
        return why.str();
      }
    }
    if (n.is_leaf()) {
      if (n.end - n.begin > leaf_capacity_) {
        why << "leaf " << id << " holds " << (n.end - n.begin) << " points";
        return why.str();
      }
      if (n.end == n.begin) {
        why << "leaf " << id << " is empty";
        return why.str();
      }
      for (std::uint32_t i = n.begin; i < n.end; ++i) ++covered[perm_[i]];
      continue;
    }
    for (std::uint32_t child : {n.left, n.right}) {
      if (!n.box.contains(nodes_[child].box)) {
        why << "node " << id << " does not contain child " << child;
        return why.str();
      }
      stack.push_back(child);
    }
  }
  if (seen_nodes != nodes_.size()) return "unreachable nodes";
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (covered[i] != 1) {
      why << "point " << i << " appears in " << covered[i] << " leaves";
      return why.str();
    }
  }
  return {};
}

}  // namespace graspkit
