#include "graspkit/perception.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "graspkit/error.hpp"

namespace graspkit {
namespace {

// Mean distance from each point to its k nearest other points.
std::vector<double> mean_knn_distance(const std::vector<Point3>& pts, int k) {
  const Bvh bvh = Bvh::build(pts);
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto hits = bvh.knn(pts[i], static_cast<std::size_t>(k) + 1);
    double sum = 0.0;
    int used = 0;
    for (const auto& h : hits) {
      if (h.index == i || used == k) continue;
      sum += h.distance;
      ++used;
    }
    out[i] = used > 0 ? sum / used : 0.0;
  }
  return out;
}

struct PlaneFit {
  Eigen::Vector4d plane;
  std::size_t inliers = 0;
};

std::size_t count_inliers(const std::vector<Point3>& pts, const Eigen::Vector4d& pl,
                          double thr) {
  const Vec3 n = pl.head<3>();
  std::size_t c = 0;
  for (const auto& p : pts) {
    if (std::abs(n.dot(p) - pl[3]) <= thr) ++c;
  }
  return c;
}

std::optional<PlaneFit> ransac_plane(const std::vector<Point3>& pts, double thr,
                                     int iterations, std::uint64_t seed) {
  if (pts.size() < 3) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  std::optional<PlaneFit> best;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    const double len = n.norm();
    if (!(len > 1e-12)) continue;
    n /= len;
    Eigen::Vector4d pl;
    pl << n, n.dot(pts[a]);
    const std::size_t cnt = count_inliers(pts, pl, thr);
    if (!best || cnt > best->inliers) best = PlaneFit{pl, cnt};
  }
  if (!best) return best;

  // Least-squares refit on the consensus set; kept only if it does not lose
  // support.
  const Vec3 n0 = best->plane.head<3>();
  Vec3 mean = Vec3::Zero();
  std::size_t m = 0;
  for (const auto& p : pts) {
    if (std::abs(n0.dot(p) - best->plane[3]) <= thr) {
      mean += p;
      ++m;
    }
  }
  if (m >= 3) {
    mean /= static_cast<double>(m);
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
      if (std::abs(n0.dot(p) - best->plane[3]) <= thr) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
      }
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    Vec3 n = es.eigenvectors().col(0).normalized();
    if (n.dot(n0) < 0) n = -n;
    Eigen::Vector4d pl;
    pl << n, n.dot(mean);
    const std::size_t cnt = count_inliers(pts, pl, thr);
    if (cnt >= best->inliers) best = PlaneFit{pl, cnt};
  }
  return best;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (outlier_k < 3) throw Error(Errc::kValidationError, "outlier_k must be >= 3");
  if (!(outlier_stddev > 0)) throw Error(Errc::kValidationError, "outlier_stddev must be > 0");
  if (!(plane_distance_threshold > 0)) {
    throw Error(Errc::kValidationError, "plane_distance_threshold must be > 0");
  }
  if (plane_iterations <= 0) throw Error(Errc::kValidationError, "plane_iterations must be > 0");
  if (!(plane_min_inlier_fraction >= 0 && plane_min_inlier_fraction <= 1)) {
    throw Error(Errc::kValidationError, "plane_min_inlier_fraction must be in [0, 1]");
  }
  if (!crop_box.valid()) throw Error(Errc::kValidationError, "crop_box is not a valid box");
}

PreprocessResult preprocess(const PointCloud& cloud, const PreprocessConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw Error(Errc::kEmptyInput, "preprocess on empty cloud");
  const std::size_t n = cloud.size();
  PreprocessResult out;
  out.reasons.assign(n, RemovalReason::kKept);

  std::vector<std::uint32_t> live;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (cfg.crop_box.contains(cloud.points[i])) {
      live.push_back(i);
    } else {
      out.reasons[i] = RemovalReason::kOutsideCrop;
    }
  }

  auto gather = [&](const std::vector<std::uint32_t>& idx) {
    std::vector<Point3> pts;
    pts.reserve(idx.size());
    for (auto i : idx) pts.push_back(cloud.points[i]);
    return pts;
  };

  if (cfg.remove_plane && live.size() >= 3) {
    const auto pts = gather(live);
    const auto fit = ransac_plane(pts, cfg.plane_distance_threshold, cfg.plane_iterations,
                                  cfg.rng_seed);
    if (fit && static_cast<double>(fit->inliers) >=
                   cfg.plane_min_inlier_fraction * static_cast<double>(live.size())) {
      out.plane = fit->plane;
      const Vec3 nrm = fit->plane.head<3>();
      std::vector<std::uint32_t> kept;
      for (std::size_t j = 0; j < live.size(); ++j) {
        if (std::abs(nrm.dot(pts[j]) - fit->plane[3]) <= cfg.plane_distance_threshold) {
          out.reasons[live[j]] = RemovalReason::kPlane;
        } else {
          kept.push_back(live[j]);
        }
      }
      live.swap(kept);
    }
  }

  if (live.size() > 1) {
    const int k = std::min<int>(cfg.outlier_k, static_cast<int>(live.size()) - 1);
    const auto mean_d = mean_knn_distance(gather(live), k);
    const double mu = std::accumulate(mean_d.begin(), mean_d.end(), 0.0) / mean_d.size();
    double var = 0.0;
    for (double d : mean_d) var += (d - mu) * (d - mu);
    const double sigma = std::sqrt(var / mean_d.size());
    const double limit = mu + cfg.outlier_stddev * sigma;
    std::vector<std::uint32_t> kept;
    for (std::size_t j = 0; j < live.size(); ++j) {
      if (mean_d[j] > limit) {
        out.reasons[live[j]] = RemovalReason::kOutlier;
      } else {
        kept.push_back(live[j]);
      }
    }
    live.swap(kept);
  }

  if (live.empty()) {
    throw Error(Errc::kEmptyAfterPreprocess, "every point was removed by preprocessing");
  }
  out.kept_indices = live;
  out.cloud.points = gather(live);
  if (cloud.has_labels()) {
    for (auto i : live) out.cloud.labels.push_back(cloud.labels[i]);
  }
  return out;
}

std::vector<std::uint32_t> segment_region_growing(const Bvh& bvh, std::size_t seed,
                                                  double radius) {
  if (seed >= bvh.size()) {
    throw Error(Errc::kIndexOutOfRange, "region growing seed " + std::to_string(seed) +
                                            " outside cloud of " + std::to_string(bvh.size()));
  }
  if (!(radius > 0)) throw Error(Errc::kInvalidArgument, "region growing radius must be > 0");
  std::vector<char> in(bvh.size(), 0);
  std::deque<std::uint32_t> frontier{static_cast<std::uint32_t>(seed)};
  in[seed] = 1;
  std::vector<std::uint32_t> out;
  while (!frontier.empty()) {
    const std::uint32_t i = frontier.front();
    frontier.pop_front();
    out.push_back(i);
    for (std::uint32_t j : bvh.radius(bvh.point(i), radius)) {
      if (!in[j]) {
        in[j] = 1;
        frontier.push_back(j);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> segment_region_growing(const PointCloud& cloud, std::size_t seed,
                                                  double radius) {
  if (seed >= cloud.size()) {
    throw Error(Errc::kIndexOutOfRange, "region growing seed " + std::to_string(seed) +
                                            " outside cloud of " + std::to_string(cloud.size()));
  }
  return segment_region_growing(Bvh::build(cloud), seed, radius);
}

std::size_t default_seed(const Bvh& bvh, const Point3& target, double radius,
                         std::size_t min_neighbors) {
  std::vector<std::pair<double, std::uint32_t>> order(bvh.size());
  for (std::uint32_t i = 0; i < bvh.size(); ++i) {
    order[i] = {(bvh.point(i) - target).squaredNorm(), i};
  }
  std::sort(order.begin(), order.end());
  for (const auto& [d, i] : order) {
    if (bvh.radius(bvh.point(i), radius).size() > min_neighbors) return i;
  }
  return order.front().second;
}

NormalField estimate_normals(const Bvh& bvh, int k, const Point3& camera) {
  if (k < 3) throw Error(Errc::kInvalidArgument, "normal estimation needs k >= 3");
  if (bvh.size() < static_cast<std::size_t>(k)) {
    throw Error(Errc::kInsufficientPoints, "normal estimation needs at least k points");
  }
  NormalField field;
  field.k = k;
  field.normals.resize(bvh.size());
  for (std::size_t i = 0; i < bvh.size(); ++i) {
    const Point3& p = bvh.point(i);
    const auto hits = bvh.knn(p, static_cast<std::size_t>(k));
    Vec3 mean = Vec3::Zero();
    for (const auto& h : hits) mean += bvh.point(h.index);
    mean /= static_cast<double>(hits.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& h : hits) {
      const Vec3 d = bvh.point(h.index) - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    Vec3 nrm = es.eigenvectors().col(0).normalized();
    if (nrm.dot(camera - p) < 0) nrm = -nrm;
    field.normals[i] = nrm;
  }
  return field;
}

NormalField estimate_normals(const PointCloud& cloud, int k, const Point3& camera) {
  if (k < 3) throw Error(Errc::kInvalidArgument, "normal estimation needs k >= 3");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw Error(Errc::kInsufficientPoints, "normal estimation needs at least k points");
  }
  return estimate_normals(Bvh::build(cloud), k, camera);
}

std::vector<Point3> smooth_points(const Bvh& bvh, int k) {
  if (k < 3) throw Error(Errc::kInvalidArgument, "smoothing needs k >= 3");
  if (bvh.size() < static_cast<std::size_t>(k)) {
    throw Error(Errc::kInsufficientPoints, "smoothing needs at least k points");
  }
  std::vector<Point3> out(bvh.size());
  for (std::size_t i = 0; i < bvh.size(); ++i) {
    const Point3& p = bvh.point(i);
    const auto hits = bvh.knn(p, static_cast<std::size_t>(k));
    Vec3 mean = Vec3::Zero();
    for (const auto& h : hits) mean += bvh.point(h.index);
    mean /= static_cast<double>(hits.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& h : hits) {
      const Vec3 d = bvh.point(h.index) - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    const Vec3 nrm = es.eigenvectors().col(0);
    out[i] = p - nrm.dot(p - mean) * nrm;
  }
  return out;
}

double segmentation_accuracy(std::vector<std::uint32_t> predicted,
                             std::vector<std::uint32_t> truth) {
  std::sort(predicted.begin(), predicted.end());
  predicted.erase(std::unique(predicted.begin(), predicted.end()), predicted.end());
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
  if (truth.empty()) return predicted.empty() ? 100.0 : 0.0;
  std::vector<std::uint32_t> both;
  std::set_intersection(predicted.begin(), predicted.end(), truth.begin(), truth.end(),
                        std::back_inserter(both));
  return 100.0 * static_cast<double>(both.size()) / static_cast<double>(truth.size());
}

}  // namespace graspkit
