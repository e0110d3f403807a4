#include <algorithm>
#include <limits>

#include "graspkit/simd/kernels.hpp"

namespace graspkit::simd::scalar {
namespace {

Extrema extrema_aos(const double* xyz, std::size_t n) {
  double lo[3] = {xyz[0], xyz[1], xyz[2]};
  double hi[3] = {xyz[0], xyz[1], xyz[2]};
  for (std::size_t i = 1; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      const double v = xyz[3 * i + a];
      lo[a] = std::min(lo[a], v);
      hi[a] = std::max(hi[a], v);
    }
  }
  return {Point3(lo[0], lo[1], lo[2]), Point3(hi[0], hi[1], hi[2])};
}

inline double dist_sq(const SoaView& p, std::size_t i, const double* q) {
  const double dx = p.x[i] - q[0];
  const double dy = p.y[i] - q[1];
  const double dz = p.z[i] - q[2];
  return (dx * dx + dy * dy) + dz * dz;
}

Nearest nearest(SoaView pts, const double* q) {
  Nearest best{kNoIndex, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < pts.n; ++i) {
    const double d = dist_sq(pts, i, q);
    if (d < best.dist_sq) best = {i, d};
  }
  return best;
}

inline double axis_gap(double lo, double hi, double v) {
  return std::max(std::max(lo - v, 0.0), v - hi);
}

double min_box_distance_sq(SoaView pts, const double* lo, const double* hi) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.n; ++i) {
    const double gx = axis_gap(lo[0], hi[0], pts.x[i]);
    const double gy = axis_gap(lo[1], hi[1], pts.y[i]);
    const double gz = axis_gap(lo[2], hi[2], pts.z[i]);
    best = std::min(best, (gx * gx + gy * gy) + gz * gz);
  }
  return best;
}

void distances_sq(SoaView pts, const double* q, double* out) {
  for (std::size_t i = 0; i < pts.n; ++i) out[i] = dist_sq(pts, i, q);
}

void collect_within(SoaView pts, const double* q, double r_sq, std::uint32_t base,
                    std::vector<std::uint32_t>& out) {
  for (std::size_t i = 0; i < pts.n; ++i) {
    if (dist_sq(pts, i, q) <= r_sq) out.push_back(base + static_cast<std::uint32_t>(i));
  }
}

bool any_within(SoaView pts, const double* q, double r_sq) {
  for (std::size_t i = 0; i < pts.n; ++i) {
    if (dist_sq(pts, i, q) <= r_sq) return true;
  }
  return false;
}

constexpr KernelTable kTable{
    "scalar",       &extrema_aos,    &nearest,    &min_box_distance_sq,
    &distances_sq,  &collect_within, &any_within,
};

}  // namespace

const KernelTable& table() { return kTable; }

}  // namespace graspkit::simd::scalar
