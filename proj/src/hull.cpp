#include "graspkit/hull.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "graspkit/error.hpp"

namespace graspkit {
namespace {

// Static filter bound for a 3x3 determinant of rounded differences.
constexpr double kEps = std::numeric_limits<double>::epsilon() * 0.5;
constexpr double kOrientErrBound = (7.0 + 56.0 * kEps) * kEps;

int orient3d_exact(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const mpq_class ux = mpq_class(b.x()) - a.x(), uy = mpq_class(b.y()) - a.y(),
                  uz = mpq_class(b.z()) - a.z();
  const mpq_class vx = mpq_class(c.x()) - a.x(), vy = mpq_class(c.y()) - a.y(),
                  vz = mpq_class(c.z()) - a.z();
  const mpq_class wx = mpq_class(d.x()) - a.x(), wy = mpq_class(d.y()) - a.y(),
                  wz = mpq_class(d.z()) - a.z();
  const mpq_class det = ux * (vy * wz - vz * wy) - uy * (vx * wz - vz * wx) +
                        uz * (vx * wy - vy * wx);
  return sgn(det);
}

struct Face {
  std::array<int, 3> v{};
  // nb[i] is the face across edge (v[i], v[(i + 1) % 3]).
  std::array<int, 3> nb{-1, -1, -1};
  std::vector<int> outside;
  Vec3 normal = Vec3::Zero();
  double offset = 0.0;
  bool alive = true;
  int seen = 0;     // stamp of the last visibility search that reached this face
  int visible = 0;  // stamp of the last search that found it visible
};

class QuickHull {
 public:
  explicit QuickHull(std::span<const Point3> pts) : pts_(pts) {}

  double volume() {
    if (!build_simplex()) return 0.0;
    expand();
    double vol = 0.0;
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      const Vec3 a = pts_[f.v[0]] - interior_;
      const Vec3 b = pts_[f.v[1]] - interior_;
      const Vec3 c = pts_[f.v[2]] - interior_;
      vol += a.dot(b.cross(c));
    }
    return vol / 6.0;
  }

 private:
  int orient(const Face& f, int p) const {
    return orient3d(pts_[f.v[0]], pts_[f.v[1]], pts_[f.v[2]], pts_[p]);
  }

  int add_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    const Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = n.norm();
    f.normal = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    f.offset = f.normal.dot(pts_[a]);
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  bool build_simplex() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) return false;
    int i0 = 0;
    for (int i = 1; i < n; ++i) {
      if (pts_[i].x() < pts_[i0].x()) i0 = i;
    }
    int i1 = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = (pts_[i] - pts_[i0]).squaredNorm();
      if (d > best) best = d, i1 = i;
    }
    if (i1 < 0) return false;
    int i2 = -1;
    best = 0.0;
    const Vec3 axis = pts_[i1] - pts_[i0];
    for (int i = 0; i < n; ++i) {
      const double d = axis.cross(pts_[i] - pts_[i0]).squaredNorm();
      if (d > best) best = d, i2 = i;
    }
    if (i2 < 0) return false;
    const Vec3 nrm = axis.cross(pts_[i2] - pts_[i0]);
    int i3 = -1;
    best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(nrm.dot(pts_[i] - pts_[i0]));
      if (d > best && orient3d(pts_[i0], pts_[i1], pts_[i2], pts_[i]) != 0) {
        best = d, i3 = i;
      }
    }
    if (i3 < 0) {
      for (int i = 0; i < n && i3 < 0; ++i) {
        if (orient3d(pts_[i0], pts_[i1], pts_[i2], pts_[i]) != 0) i3 = i;
      }
      if (i3 < 0) return false;
    }
    interior_ = (pts_[i0] + pts_[i1] + pts_[i2] + pts_[i3]) * 0.25;

    const std::array<int, 4> s{i0, i1, i2, i3};
    std::map<std::pair<int, int>, std::pair<int, int>> edge_owner;
    for (int skip = 0; skip < 4; ++skip) {
      std::array<int, 3> tri{};
      int k = 0;
      for (int j = 0; j < 4; ++j) {
        if (j != skip) tri[k++] = s[j];
      }
      if (orient3d(pts_[tri[0]], pts_[tri[1]], pts_[tri[2]], pts_[s[skip]]) > 0) {
        std::swap(tri[1], tri[2]);
      }
      const int f = add_face(tri[0], tri[1], tri[2]);
      for (int e = 0; e < 3; ++e) edge_owner[{tri[e], tri[(e + 1) % 3]}] = {f, e};
    }
    for (int f = 0; f < 4; ++f) {
      for (int e = 0; e < 3; ++e) {
        const int a = faces_[f].v[e];
        const int b = faces_[f].v[(e + 1) % 3];
        faces_[f].nb[e] = edge_owner.at({b, a}).first;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (i == i0 || i == i1 || i == i2 || i == i3) continue;
      for (int f = 0; f < 4; ++f) {
        if (orient(faces_[f], i) > 0) {
          faces_[f].outside.push_back(i);
          break;
        }
      }
    }
    return true;
  }

  void expand() {
    std::vector<int> work;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      if (!faces_[f].outside.empty()) work.push_back(f);
    }
    std::vector<int> visible;
    int stamp = 0;
    std::vector<std::pair<int, int>> horizon;  // (face, edge)
    std::unordered_map<int, int> by_start, by_end;
    while (!work.empty()) {
      const int f0 = work.back();
      work.pop_back();
      if (!faces_[f0].alive || faces_[f0].outside.empty()) continue;

      int eye = faces_[f0].outside.front();
      double far = -1.0;
      for (int p : faces_[f0].outside) {
        const double d = faces_[f0].normal.dot(pts_[p]) - faces_[f0].offset;
        if (d > far) far = d, eye = p;
      }

      visible.clear();
      horizon.clear();
      ++stamp;
      std::vector<int> stack{f0};
      faces_[f0].seen = stamp;
      faces_[f0].visible = stamp;
      while (!stack.empty()) {
        const int f = stack.back();
        stack.pop_back();
        visible.push_back(f);
        for (int e = 0; e < 3; ++e) {
          const int g = faces_[f].nb[e];
          if (faces_[g].seen == stamp) continue;
          faces_[g].seen = stamp;
          if (orient(faces_[g], eye) > 0) {
            faces_[g].visible = stamp;
            stack.push_back(g);
          }
        }
      }
      for (int f : visible) {
        for (int e = 0; e < 3; ++e) {
          if (faces_[faces_[f].nb[e]].visible != stamp) horizon.push_back({f, e});
        }
      }

      by_start.clear();
      by_end.clear();
      std::vector<int> created;
      created.reserve(horizon.size());
      for (const auto& [f, e] : horizon) {
        const int a = faces_[f].v[e];
        const int b = faces_[f].v[(e + 1) % 3];
        const int across = faces_[f].nb[e];
        const int nf = add_face(a, b, eye);
        faces_[nf].nb[0] = across;
        for (int k = 0; k < 3; ++k) {
          if (faces_[across].nb[k] == f) faces_[across].nb[k] = nf;
        }
        by_start[a] = nf;
        by_end[b] = nf;
        created.push_back(nf);
      }
      for (int nf : created) {
        const int a = faces_[nf].v[0];
        const int b = faces_[nf].v[1];
        faces_[nf].nb[1] = by_start.at(b);
        faces_[nf].nb[2] = by_end.at(a);
      }

      for (int f : visible) {
        faces_[f].alive = false;
        for (int p : faces_[f].outside) {
          if (p == eye) continue;
          for (int nf : created) {
            if (orient(faces_[nf], p) > 0) {
              faces_[nf].outside.push_back(p);
              break;
            }
          }
        }
        std::vector<int>().swap(faces_[f].outside);
      }
      for (int nf : created) {
        if (!faces_[nf].outside.empty()) work.push_back(nf);
      }
    }
  }

  std::span<const Point3> pts_;
  std::vector<Face> faces_;
  Point3 interior_ = Point3::Zero();
};

}  // namespace

int orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const double ux = b.x() - a.x(), uy = b.y() - a.y(), uz = b.z() - a.z();
  const double vx = c.x() - a.x(), vy = c.y() - a.y(), vz = c.z() - a.z();
  const double wx = d.x() - a.x(), wy = d.y() - a.y(), wz = d.z() - a.z();
  const double vywz = vy * wz, vzwy = vz * wy;
  const double vxwz = vx * wz, vzwx = vz * wx;
  const double vxwy = vx * wy, vywx = vy * wx;
  const double det = ux * (vywz - vzwy) - uy * (vxwz - vzwx) + uz * (vxwy - vywx);
  const double permanent = (std::abs(vywz) + std::abs(vzwy)) * std::abs(ux) +
                           (std::abs(vxwz) + std::abs(vzwx)) * std::abs(uy) +
                           (std::abs(vxwy) + std::abs(vywx)) * std::abs(uz);
  const double bound = kOrientErrBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient3d_exact(a, b, c, d);
}

double convex_hull_volume(std::span<const Point3> points) {
  QuickHull hull(points);
  return std::max(0.0, hull.volume());
}

double convex_hull_volume(const PointCloud& cloud) {
  return convex_hull_volume(std::span<const Point3>(cloud.points));
}

EmptySpaceRatio empty_space_ratio(const PointCloud& cloud, const Aabb& box) {
  if (cloud.empty()) throw Error(Errc::kEmptyInput, "empty_space_ratio on empty cloud");
  EmptySpaceRatio out;
  out.box_volume = volume(box);
  if (out.box_volume <= 0.0) {
    out.degenerate = true;
    out.eta = 1.0;
    return out;
  }
  out.hull_volume = convex_hull_volume(cloud);
  out.eta = std::clamp(1.0 - out.hull_volume / out.box_volume, 0.0, 1.0);
  return out;
}

}  // namespace graspkit
