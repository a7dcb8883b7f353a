#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mrtrus/types.hpp"

namespace mrtrus {

struct DistanceSample {
  double distance = 0.0;
  /// Unit vector pointing away from the nearest target point; zero where
  /// the direction is undefined (on a target point).
  Vec3 gradient = Vec3::Zero();
};

/// Points: plain distance to the nearest target point.
/// Surface: distance to a small disk ("splat") around each target point,
/// oriented by a local PCA normal and sized to the local sample spacing, so
/// the sampling gaps between points do not show up as energy bumps. Points
/// whose neighbourhood is not planar keep the plain point distance.
enum class DistanceMode { Points, Surface };

/// Unsigned distance to a point set, tabulated on a uniform grid.
///
/// Every node stores the index of its exact nearest target point. A query
/// inside the grid measures the exact distance to the candidates of the 8
/// surrounding nodes and keeps the closest, so the result is never below the
/// true distance and is exact wherever one of those candidates is the true
/// nearest point. Queries outside the grid scan the stored cloud.
class DistanceMap {
 public:
  static constexpr double kDefaultCellSize = 1.0;
  static constexpr double kDefaultMargin = 15.0;

  static constexpr int kNormalNeighbours = 16;

  static DistanceMap build(const PointCloud& target, double cell_size = kDefaultCellSize,
                           double margin = kDefaultMargin, DistanceMode mode = DistanceMode::Points);

  DistanceSample query(const Point3& p) const;
  DistanceSample exact(const Point3& p) const;
  bool contains(const Point3& p) const;

  double cell_size() const noexcept { return cell_size_; }
  DistanceMode mode() const noexcept { return normals_.empty() ? DistanceMode::Points : DistanceMode::Surface; }
  const Point3& lower() const noexcept { return lower_; }
  Point3 upper() const { return lower_ + cell_size_ * Vec3(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1); }
  const std::array<int, 3>& dims() const noexcept { return dims_; }
  Point3 node_position(int i, int j, int k) const { return lower_ + cell_size_ * Vec3(i, j, k); }
  DistanceSample node(int i, int j, int k) const;

  const std::vector<Point3>& target() const noexcept { return *target_; }
  const Point3& target_centroid() const noexcept { return target_centroid_; }

 private:
  DistanceMap() = default;
  DistanceSample sample(std::size_t target_index, const Point3& p) const;
  std::size_t flat(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }

  Point3 lower_ = Point3::Zero();
  std::array<int, 3> dims_{};
  double cell_size_ = kDefaultCellSize;
  std::vector<std::uint32_t> nearest_;
  std::shared_ptr<const std::vector<Point3>> target_;
  // surface mode only; a zero normal marks a point without a usable plane
  std::vector<Vec3> normals_;
  std::vector<double> radii_;
  Point3 target_centroid_ = Point3::Zero();
};

/// Exact minimum Euclidean distance by linear scan.
double brute_force_distance(std::span<const Point3> target, const Point3& p);
double brute_force_distance(const PointCloud& target, const Point3& p);

}  // namespace mrtrus
