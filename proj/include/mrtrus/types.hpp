#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mrtrus {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;

enum class Modality { Trus, MriTransverse, MriSagittal, MriCoronal };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);

/// Maps a stack-local point (in-plane u, v and stack offset w) into the
/// modality's reference frame. TRUS and transverse MRI are the identity;
/// sagittal (u,v,w) = (y,z,x) and coronal (u,v,w) = (z,x,y) are cyclic
/// permutations, so every stack frame stays right-handed.
Point3 stack_to_frame(Modality m, double u, double v, double w);
/// Inverse of stack_to_frame; returns (u, v, w).
Point3 frame_to_stack(Modality m, const Point3& p);

struct PlanarContour {
  int slice_index = 0;
  double z = 0.0;
  std::vector<Point2> points;
};

/// Throws DegeneratePolygon (< 3 points) or InvalidInput (consecutive
/// duplicates, self-intersection, non-finite coordinates).
void validate_contour(const PlanarContour& c);

/// Ordered parallel contours of one modality. Immutable once built; the
/// constructor enforces sorting, uniform spacing and contour validity.
class ContourStack {
 public:
  static constexpr double kSpacingTolerance = 1e-6;

  ContourStack(Modality modality, double spacing, std::vector<PlanarContour> contours);

  Modality modality() const noexcept { return modality_; }
  double spacing() const noexcept { return spacing_; }
  const std::vector<PlanarContour>& contours() const noexcept { return contours_; }
  std::size_t size() const noexcept { return contours_.size(); }
  bool empty() const noexcept { return contours_.empty(); }

  const PlanarContour* find(int slice_index) const;
  /// z of slice `index`, extrapolated along the stack when absent.
  double z_of(int slice_index) const;

  /// Copy with slice `contour.slice_index` replaced or inserted.
  ContourStack with_contour(PlanarContour contour) const;
  ContourStack without_slice(int slice_index) const;

 private:
  Modality modality_;
  double spacing_;
  std::vector<PlanarContour> contours_;
};

/// Points with their per-point error estimate sigma (mm).
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::vector<Point3> points, std::vector<double> sigmas);
  PointCloud(std::vector<Point3> points, double sigma);

  const std::vector<Point3>& points() const noexcept { return points_; }
  const std::vector<double>& sigmas() const noexcept { return sigmas_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  Point3 centroid() const;

 private:
  std::vector<Point3> points_;
  std::vector<double> sigmas_;
};

/// Rotation (unit quaternion) followed by translation.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Eigen::Quaterniond& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& translation);

  const Eigen::Quaterniond& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  /// (a * b)(p) == a(b(p))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Vec3 translation_ = Vec3::Zero();
};

inline Point3 transform_point(const RigidTransform& t, const Point3& p) { return t.apply(p); }

/// Axis-aligned scalar volume, x-fastest. `origin` is the centre of voxel (0,0,0).
class VolumeGrid {
 public:
  VolumeGrid(std::array<int, 3> dims, Vec3 spacing, Point3 origin, std::vector<float> voxels);
  VolumeGrid(std::array<int, 3> dims, Vec3 spacing, Point3 origin);

  const std::array<int, 3>& dims() const noexcept { return dims_; }
  const Vec3& spacing() const noexcept { return spacing_; }
  const Point3& origin() const noexcept { return origin_; }
  const std::vector<float>& voxels() const noexcept { return voxels_; }
  std::vector<float>& voxels() noexcept { return voxels_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  float at(int i, int j, int k) const { return voxels_[index(i, j, k)]; }
  float& at(int i, int j, int k) { return voxels_[index(i, j, k)]; }

  /// Continuous voxel coordinates of a world point.
  Vec3 to_voxel(const Point3& p) const { return (p - origin_).cwiseQuotient(spacing_); }
  Point3 to_world(int i, int j, int k) const {
    return origin_ + Vec3(i, j, k).cwiseProduct(spacing_);
  }

  std::pair<float, float> intensity_range() const;

 private:
  std::array<int, 3> dims_;
  Vec3 spacing_;
  Point3 origin_;
  std::vector<float> voxels_;
};

/// 8-bit grayscale image, row-major, row 0 at the top.
struct Image2D {
  int width = 0;
  int height = 0;
  double pixel_spacing = 1.0;
  std::vector<std::uint8_t> pixels;

  Image2D() = default;
  Image2D(int w, int h, double spacing, std::uint8_t fill = 0);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr double kDefaultSigma = 1.0;

/// Contour vertices of `stack` as a 3-D cloud in the modality's frame.
/// In-plane coordinates are scaled by `pixel_to_mm`; order is slice-major,
/// then vertex order.
PointCloud cloud_from_stack(const ContourStack& stack, double pixel_to_mm = 1.0,
                            double sigma = kDefaultSigma);
/// Concatenation of cloud_from_stack over several stacks (the 3-plane MRI merge).
PointCloud cloud_from_stacks(std::span<const ContourStack> stacks, double pixel_to_mm = 1.0,
                             double sigma = kDefaultSigma);

}  // namespace mrtrus
