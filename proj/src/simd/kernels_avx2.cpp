// Compiled with -mavx2 only; callers reach these through the dispatch table
// after a CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <limits>

#include "graspkit/simd/kernels.hpp"

namespace graspkit::simd::avx2 {
namespace {

inline double hmin(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
}

inline double hmax(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
}

// Four AoS points span three registers with component patterns
// (x y z x) (y z x y) (z x y z); each pattern is reduced at the end.
Extrema extrema_aos(const double* xyz, std::size_t n) {
  double lo[3] = {xyz[0], xyz[1], xyz[2]};
  double hi[3] = {xyz[0], xyz[1], xyz[2]};
  std::size_t i = 0;
  if (n >= 4) {
    __m256d mn0 = _mm256_loadu_pd(xyz);
    __m256d mn1 = _mm256_loadu_pd(xyz + 4);
    __m256d mn2 = _mm256_loadu_pd(xyz + 8);
    __m256d mx0 = mn0, mx1 = mn1, mx2 = mn2;
    for (i = 4; i + 4 <= n; i += 4) {
      const double* p = xyz + 3 * i;
      const __m256d a = _mm256_loadu_pd(p);
      const __m256d b = _mm256_loadu_pd(p + 4);
      const __m256d c = _mm256_loadu_pd(p + 8);
      mn0 = _mm256_min_pd(mn0, a);
      mn1 = _mm256_min_pd(mn1, b);
      mn2 = _mm256_min_pd(mn2, c);
      mx0 = _mm256_max_pd(mx0, a);
      mx1 = _mm256_max_pd(mx1, b);
      mx2 = _mm256_max_pd(mx2, c);
    }
    alignas(32) double m[3][4];
    alignas(32) double M[3][4];
    _mm256_store_pd(m[0], mn0);
    _mm256_store_pd(m[1], mn1);
    _mm256_store_pd(m[2], mn2);
    _mm256_store_pd(M[0], mx0);
    _mm256_store_pd(M[1], mx1);
    _mm256_store_pd(M[2], mx2);
    // (register, lane) holding each component.
    static constexpr int kSlots[3][4][2] = {
        {{0, 0}, {0, 3}, {1, 2}, {2, 1}},  // x
        {{0, 1}, {1, 0}, {1, 3}, {2, 2}},  // y
        {{0, 2}, {1, 1}, {2, 0}, {2, 3}},  // z
    };
    for (int a = 0; a < 3; ++a) {
      for (const auto& s : kSlots[a]) {
        lo[a] = std::min(lo[a], m[s[0]][s[1]]);
        hi[a] = std::max(hi[a], M[s[0]][s[1]]);
      }
    }
  } else {
    i = 1;
  }
  for (; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      const double v = xyz[3 * i + a];
      lo[a] = std::min(lo[a], v);
      hi[a] = std::max(hi[a], v);
    }
  }
  return {Point3(lo[0], lo[1], lo[2]), Point3(hi[0], hi[1], hi[2])};
}

inline __m256d dist_sq4(const SoaView& p, std::size_t i, __m256d qx, __m256d qy,
                        __m256d qz) {
  const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(p.x + i), qx);
  const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(p.y + i), qy);
  const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(p.z + i), qz);
  return _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                       _mm256_mul_pd(dz, dz));
}

inline double dist_sq1(const SoaView& p, std::size_t i, const double* q) {
  const double dx = p.x[i] - q[0];
  const double dy = p.y[i] - q[1];
  const double dz = p.z[i] - q[2];
  return (dx * dx + dy * dy) + dz * dz;
}

Nearest nearest(SoaView pts, const double* q) {
  Nearest best{kNoIndex, std::numeric_limits<double>::infinity()};
  std::size_t i = 0;
  if (pts.n >= 4) {
    const __m256d qx = _mm256_set1_pd(q[0]);
    const __m256d qy = _mm256_set1_pd(q[1]);
    const __m256d qz = _mm256_set1_pd(q[2]);
    __m256d best_d = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d best_i = _mm256_set1_pd(-1.0);
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d four = _mm256_set1_pd(4.0);
    for (; i + 4 <= pts.n; i += 4) {
      const __m256d d = dist_sq4(pts, i, qx, qy, qz);
      const __m256d lt = _mm256_cmp_pd(d, best_d, _CMP_LT_OQ);
      best_d = _mm256_blendv_pd(best_d, d, lt);
      best_i = _mm256_blendv_pd(best_i, idx, lt);
      idx = _mm256_add_pd(idx, four);
    }
    alignas(32) double bd[4];
    alignas(32) double bi[4];
    _mm256_store_pd(bd, best_d);
    _mm256_store_pd(bi, best_i);
    for (int l = 0; l < 4; ++l) {
      if (bi[l] < 0.0) continue;
      const auto li = static_cast<std::size_t>(bi[l]);
      if (bd[l] < best.dist_sq || (bd[l] == best.dist_sq && li < best.index)) {
        best = {li, bd[l]};
      }
    }
  }
  for (; i < pts.n; ++i) {
    const double d = dist_sq1(pts, i, q);
    if (d < best.dist_sq) best = {i, d};
  }
  return best;
}

double min_box_distance_sq(SoaView pts, const double* lo, const double* hi) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (pts.n >= 4) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d lx = _mm256_set1_pd(lo[0]), ly = _mm256_set1_pd(lo[1]),
                  lz = _mm256_set1_pd(lo[2]);
    const __m256d hx = _mm256_set1_pd(hi[0]), hy = _mm256_set1_pd(hi[1]),
                  hz = _mm256_set1_pd(hi[2]);
    __m256d acc = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    for (; i + 4 <= pts.n; i += 4) {
      const __m256d x = _mm256_loadu_pd(pts.x + i);
      const __m256d y = _mm256_loadu_pd(pts.y + i);
      const __m256d z = _mm256_loadu_pd(pts.z + i);
      const __m256d gx =
          _mm256_max_pd(_mm256_max_pd(_mm256_sub_pd(lx, x), zero), _mm256_sub_pd(x, hx));
      const __m256d gy =
          _mm256_max_pd(_mm256_max_pd(_mm256_sub_pd(ly, y), zero), _mm256_sub_pd(y, hy));
      const __m256d gz =
          _mm256_max_pd(_mm256_max_pd(_mm256_sub_pd(lz, z), zero), _mm256_sub_pd(z, hz));
      const __m256d d = _mm256_add_pd(
          _mm256_add_pd(_mm256_mul_pd(gx, gx), _mm256_mul_pd(gy, gy)), _mm256_mul_pd(gz, gz));
      acc = _mm256_min_pd(acc, d);
    }
    best = hmin(acc);
  }
  for (; i < pts.n; ++i) {
    const double gx = std::max(std::max(lo[0] - pts.x[i], 0.0), pts.x[i] - hi[0]);
    const double gy = std::max(std::max(lo[1] - pts.y[i], 0.0), pts.y[i] - hi[1]);
    const double gz = std::max(std::max(lo[2] - pts.z[i], 0.0), pts.z[i] - hi[2]);
    best = std::min(best, (gx * gx + gy * gy) + gz * gz);
  }
  return best;
}

void distances_sq(SoaView pts, const double* q, double* out) {
  std::size_t i = 0;
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  for (; i + 4 <= pts.n; i += 4) _mm256_storeu_pd(out + i, dist_sq4(pts, i, qx, qy, qz));
  for (; i < pts.n; ++i) out[i] = dist_sq1(pts, i, q);
}

void collect_within(SoaView pts, const double* q, double r_sq, std::uint32_t base,
                    std::vector<std::uint32_t>& out) {
  std::size_t i = 0;
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  const __m256d rr = _mm256_set1_pd(r_sq);
  for (; i + 4 <= pts.n; i += 4) {
    const __m256d d = dist_sq4(pts, i, qx, qy, qz);
    int mask = _mm256_movemask_pd(_mm256_cmp_pd(d, rr, _CMP_LE_OQ));
    while (mask != 0) {
      const int lane = __builtin_ctz(static_cast<unsigned>(mask));
      out.push_back(base + static_cast<std::uint32_t>(i + lane));
      mask &= mask - 1;
    }
  }
  for (; i < pts.n; ++i) {
    if (dist_sq1(pts, i, q) <= r_sq) out.push_back(base + static_cast<std::uint32_t>(i));
  }
}

bool any_within(SoaView pts, const double* q, double r_sq) {
  std::size_t i = 0;
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  const __m256d rr = _mm256_set1_pd(r_sq);
  for (; i + 4 <= pts.n; i += 4) {
    const __m256d d = dist_sq4(pts, i, qx, qy, qz);
    if (_mm256_movemask_pd(_mm256_cmp_pd(d, rr, _CMP_LE_OQ)) != 0) return true;
  }
  for (; i < pts.n; ++i) {
    if (dist_sq1(pts, i, q) <= r_sq) return true;
  }
  return false;
}

constexpr KernelTable kTable{
    "avx2",         &extrema_aos,    &nearest,    &min_box_distance_sq,
    &distances_sq,  &collect_within, &any_within,
};

}  // namespace

const KernelTable* table() { return &kTable; }

}  // namespace graspkit::simd::avx2
