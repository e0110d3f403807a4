#include <atomic>
#include <cstdlib>
#include <cstring>

#include "graspkit/error.hpp"
#include "graspkit/geometry.hpp"
#include "graspkit/simd/kernels.hpp"

namespace graspkit::simd {

#if !defined(GRASPKIT_HAVE_AVX2)
namespace avx2 {
const KernelTable* table() { return nullptr; }
}  // namespace avx2
#endif

namespace {

bool cpu_has_avx2() {
#if defined(GRASPKIT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Level initial_level() {
  if (const char* env = std::getenv("GRASPKIT_SIMD"); env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Level::kScalar;
  }
  return detected_level();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table_for(initial_level())};
  return slot;
}

}  // namespace

SoaPoints::SoaPoints(std::span<const Point3> pts) {
  x.reserve(pts.size());
  y.reserve(pts.size());
  z.reserve(pts.size());
  for (const auto& p : pts) {
    x.push_back(p.x());
    y.push_back(p.y());
    z.push_back(p.z());
  }
}

std::string_view to_string(Level level) {
  return level == Level::kAvx2 ? "avx2" : "scalar";
}

Level detected_level() { return cpu_has_avx2() ? Level::kAvx2 : Level::kScalar; }

bool supported(Level level) {
  return level == Level::kScalar || (avx2::table() != nullptr && cpu_has_avx2());
}

const KernelTable& table_for(Level level) {
  if (level == Level::kAvx2 && supported(level)) return *avx2::table();
  return scalar::table();
}

Level current_level() {
  return active_slot().load() == &scalar::table() ? Level::kScalar : Level::kAvx2;
}

void set_level(Level level) {
  if (!supported(level)) {
    throw Error(Errc::kInvalidArgument,
                "SIMD level " + std::string(to_string(level)) + " not supported");
  }
  active_slot().store(&table_for(level));
}

const KernelTable& active() { return *active_slot().load(); }

Extrema extrema(std::span<const Point3> points) {
  static_assert(sizeof(Point3) == 3 * sizeof(double));
  return active().extrema_aos(points.data()->data(), points.size());
}

Nearest nearest(SoaView pts, const Point3& q) { return active().nearest(pts, q.data()); }

double min_box_distance_sq(SoaView pts, const Aabb& box) {
  return active().min_box_distance_sq(pts, box.min.data(), box.max.data());
}

void distances_sq(SoaView pts, const Point3& q, std::span<double> out) {
  active().distances_sq(pts, q.data(), out.data());
}

void collect_within(SoaView pts, const Point3& q, double r_sq, std::uint32_t base,
                    std::vector<std::uint32_t>& out) {
  active().collect_within(pts, q.data(), r_sq, base, out);
}

bool any_within(SoaView pts, const Point3& q, double r_sq) {
  return active().any_within(pts, q.data(), r_sq);
}

}  // namespace graspkit::simd
