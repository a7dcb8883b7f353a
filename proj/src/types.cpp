#include "mrtrus/types.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/geometry.hpp"

namespace mrtrus {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::Trus: return "TRUS";
    case Modality::MriTransverse: return "MRI_TRANSVERSE";
    case Modality::MriSagittal: return "MRI_SAGITTAL";
    case Modality::MriCoronal: return "MRI_CORONAL";
  }
  return "TRUS";
}

Modality parse_modality(std::string_view name) {
  if (name == "TRUS") return Modality::Trus;
  if (name == "MRI_TRANSVERSE") return Modality::MriTransverse;
  if (name == "MRI_SAGITTAL") return Modality::MriSagittal;
  if (name == "MRI_CORONAL") return Modality::MriCoronal;
  throw Error(ErrorKind::InvalidInput, fmt::format("unknown modality '{}'", name));
}

Point3 stack_to_frame(Modality m, double u, double v, double w) {
  switch (m) {
    case Modality::MriSagittal: return {w, u, v};
    case Modality::MriCoronal: return {v, w, u};
    default: return {u, v, w};
  }
}

Point3 frame_to_stack(Modality m, const Point3& p) {
  switch (m) {
    case Modality::MriSagittal: return {p.y(), p.z(), p.x()};
    case Modality::MriCoronal: return {p.z(), p.x(), p.y()};
    default: return p;
  }
}

void validate_contour(const PlanarContour& c) {
  if (c.points.size() < 3)
    throw Error(ErrorKind::DegeneratePolygon,
                fmt::format("slice {}: contour needs at least 3 points, got {}", c.slice_index,
                            c.points.size()));
  if (!std::isfinite(c.z))
    throw Error(ErrorKind::InvalidInput, fmt::format("slice {}: non-finite z", c.slice_index));
  const std::size_t n = c.points.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.points[i].allFinite())
      throw Error(ErrorKind::InvalidInput, fmt::format("slice {}: non-finite vertex", c.slice_index));
    if (c.points[i] == c.points[(i + 1) % n])
      throw Error(ErrorKind::InvalidInput,
                  fmt::format("slice {}: duplicated consecutive vertex {}", c.slice_index, i));
  }
  if (!is_simple_polygon(c.points))
    throw Error(ErrorKind::InvalidInput,
                fmt::format("slice {}: contour self-intersects", c.slice_index));
}

ContourStack::ContourStack(Modality modality, double spacing, std::vector<PlanarContour> contours)
    : modality_(modality), spacing_(spacing), contours_(std::move(contours)) {
  if (!(spacing_ > 0.0) || !std::isfinite(spacing_))
    throw Error(ErrorKind::InvalidInput, "stack spacing must be positive");
  std::sort(contours_.begin(), contours_.end(),
            [](const PlanarContour& a, const PlanarContour& b) { return a.z < b.z; });
  for (const auto& c : contours_) validate_contour(c);
  for (std::size_t i = 1; i < contours_.size(); ++i) {
    const double dz = contours_[i].z - contours_[i - 1].z;
    if (std::abs(dz - spacing_) > kSpacingTolerance)
      throw Error(ErrorKind::InvalidInput,
                  fmt::format("slices {} and {}: z step {} differs from spacing {}",
                              contours_[i - 1].slice_index, contours_[i].slice_index, dz, spacing_));
    if (contours_[i].slice_index <= contours_[i - 1].slice_index)
      throw Error(ErrorKind::InvalidInput, "slice indices must increase with z");
  }
}

const PlanarContour* ContourStack::find(int slice_index) const {
  for (const auto& c : contours_)
    if (c.slice_index == slice_index) return &c;
  return nullptr;
}

double ContourStack::z_of(int slice_index) const {
  if (contours_.empty()) return slice_index * spacing_;
  const auto& ref = contours_.front();
  return ref.z + (slice_index - ref.slice_index) * spacing_;
}

ContourStack ContourStack::with_contour(PlanarContour contour) const {
  std::vector<PlanarContour> next;
  next.reserve(contours_.size() + 1);
  for (const auto& c : contours_)
    if (c.slice_index != contour.slice_index) next.push_back(c);
  next.push_back(std::move(contour));
  return ContourStack(modality_, spacing_, std::move(next));
}

ContourStack ContourStack::without_slice(int slice_index) const {
  std::vector<PlanarContour> next;
  for (const auto& c : contours_)
    if (c.slice_index != slice_index) next.push_back(c);
  return ContourStack(modality_, spacing_, std::move(next));
}

PointCloud::PointCloud(std::vector<Point3> points, std::vector<double> sigmas)
    : points_(std::move(points)), sigmas_(std::move(sigmas)) {
  if (points_.size() != sigmas_.size())
    throw Error(ErrorKind::InvalidInput, "sigma count differs from point count");
  for (double s : sigmas_)
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::InvalidInput, "sigma must be positive");
  for (const auto& p : points_)
    if (!p.allFinite()) throw Error(ErrorKind::InvalidInput, "non-finite point");
}

PointCloud::PointCloud(std::vector<Point3> points, double sigma)
    : PointCloud(points, std::vector<double>(points.size(), sigma)) {}

Point3 PointCloud::centroid() const {
  if (points_.empty()) throw Error(ErrorKind::EmptyInput, "centroid of empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points_) sum += p;
  return sum / static_cast<double>(points_.size());
}

RigidTransform::RigidTransform(const Eigen::Quaterniond& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  // leave already-unit quaternions untouched so text round trips stay exact
  if (std::abs(rotation_.squaredNorm() - 1.0) > 1e-12) rotation_.normalize();
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle_rad,
                                               const Vec3& translation) {
  return {Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())), translation};
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return {inv, -(inv * translation_)};
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_};
}

VolumeGrid::VolumeGrid(std::array<int, 3> dims, Vec3 spacing, Point3 origin, std::vector<float> voxels)
    : dims_(dims), spacing_(spacing), origin_(origin), voxels_(std::move(voxels)) {
  for (int d : dims_)
    if (d < 1) throw Error(ErrorKind::InvalidInput, "volume dimensions must be >= 1");
  if ((spacing_.array() <= 0.0).any()) throw Error(ErrorKind::InvalidInput, "volume spacing must be positive");
  const std::size_t expected = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  if (voxels_.size() != expected)
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("voxel count {} != {}", voxels_.size(), expected));
}

VolumeGrid::VolumeGrid(std::array<int, 3> dims, Vec3 spacing, Point3 origin)
    : VolumeGrid(dims, spacing, origin,
                 std::vector<float>(static_cast<std::size_t>(std::max(dims[0], 0)) *
                                    std::max(dims[1], 0) * std::max(dims[2], 0))) {}

std::pair<float, float> VolumeGrid::intensity_range() const {
  auto [lo, hi] = std::minmax_element(voxels_.begin(), voxels_.end());
  return {*lo, *hi};
}

Image2D::Image2D(int w, int h, double spacing, std::uint8_t fill)
    : width(w), height(h), pixel_spacing(spacing),
      pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

PointCloud cloud_from_stack(const ContourStack& stack, double pixel_to_mm, double sigma) {
  if (stack.empty()) throw Error(ErrorKind::EmptyInput, "contour stack has no slices");
  std::vector<Point3> pts;
  for (const auto& c : stack.contours())
    for (const auto& p : c.points)
      pts.push_back(stack_to_frame(stack.modality(), p.x() * pixel_to_mm, p.y() * pixel_to_mm, c.z));
  return PointCloud(std::move(pts), sigma);
}

PointCloud cloud_from_stacks(std::span<const ContourStack> stacks, double pixel_to_mm, double sigma) {
  std::vector<Point3> pts;
  for (const auto& s : stacks) {
    if (s.empty()) continue;
    const auto cloud = cloud_from_stack(s, pixel_to_mm, sigma);
    pts.insert(pts.end(), cloud.points().begin(), cloud.points().end());
  }
  if (pts.empty()) throw Error(ErrorKind::EmptyInput, "no contour points in any stack");
  return PointCloud(std::move(pts), sigma);
}

}  // namespace mrtrus
