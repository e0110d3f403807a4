#pragma once

// Data-parallel inner loops used by the spatial queries.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is picked once at startup from CPUID (override with
// GRASPKIT_SIMD=scalar). Both paths evaluate the same floating-point
// expressions in the same order, so results are bit-identical; the
// equivalence suite relies on that.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "graspkit/types.hpp"

namespace graspkit {
struct Aabb;
}

namespace graspkit::simd {

/// Structure-of-arrays view over n points.
struct SoaView {
  const double* x = nullptr;
  const double* y = nullptr;
  const double* z = nullptr;
  std::size_t n = 0;

  SoaView subview(std::size_t begin, std::size_t end) const {
    return {x + begin, y + begin, z + begin, end - begin};
  }
};

/// Owning SoA storage.
struct SoaPoints {
  std::vector<double> x, y, z;

  SoaPoints() = default;
  explicit SoaPoints(std::span<const Point3> pts);
  SoaView view() const { return {x.data(), y.data(), z.data(), x.size()}; }
  std::size_t size() const { return x.size(); }
};

struct Extrema {
  Point3 min;
  Point3 max;
};

inline constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

struct Nearest {
  std::size_t index = kNoIndex;  // relative to the view; first minimum wins
  double dist_sq = 0.0;
};

struct KernelTable {
  const char* name;
  Extrema (*extrema_aos)(const double* xyz, std::size_t n);
  Nearest (*nearest)(SoaView pts, const double* q);
  double (*min_box_distance_sq)(SoaView pts, const double* lo, const double* hi);
  void (*distances_sq)(SoaView pts, const double* q, double* out);
  void (*collect_within)(SoaView pts, const double* q, double r_sq,
                         std::uint32_t base, std::vector<std::uint32_t>& out);
  bool (*any_within)(SoaView pts, const double* q, double r_sq);
};

enum class Level { kScalar, kAvx2 };

std::string_view to_string(Level level);

/// Best level supported by this CPU and build.
Level detected_level();
bool supported(Level level);
Level current_level();
/// Switches the process-wide table. Throws kInvalidArgument if unsupported.
void set_level(Level level);
const KernelTable& table_for(Level level);
const KernelTable& active();

// Convenience wrappers through the active table.
Extrema extrema(std::span<const Point3> points);  // requires non-empty
Nearest nearest(SoaView pts, const Point3& q);
double min_box_distance_sq(SoaView pts, const Aabb& box);
void distances_sq(SoaView pts, const Point3& q, std::span<double> out);
void collect_within(SoaView pts, const Point3& q, double r_sq, std::uint32_t base,
                    std::vector<std::uint32_t>& out);
bool any_within(SoaView pts, const Point3& q, double r_sq);

namespace scalar {
const KernelTable& table();
}
namespace avx2 {
// Null when the build has no AVX2 path.
const KernelTable* table();
}

}  // namespace graspkit::simd
