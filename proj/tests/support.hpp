#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "graspkit/types.hpp"

namespace graspkit::testing {

inline std::vector<Point3> uniform_points(std::mt19937_64& rng, std::size_t n,
                                          double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> out(n);
  for (auto& p : out) p = Point3(u(rng), u(rng), u(rng));
  return out;
}

// Points on a coarse integer lattice so that many queries have exact ties.
inline std::vector<Point3> lattice_points(std::mt19937_64& rng, std::size_t n, int span) {
  std::uniform_int_distribution<int> u(-span, span);
  std::vector<Point3> out(n);
  for (auto& p : out) p = Point3(u(rng), u(rng), u(rng));
  return out;
}

inline PointCloud make_cloud(std::vector<Point3> pts) {
  PointCloud c;
  c.points = std::move(pts);
  return c;
}

}  // namespace graspkit::testing
