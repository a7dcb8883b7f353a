#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mrtrus/octree_spline.hpp"
#include "mrtrus/stats.hpp"
#include "mrtrus/types.hpp"

namespace mrtrus {

struct SliceLandmark {
  int slice_index = 0;
  double z = 0.0;
  Point2 center = Point2::Zero();
};

/// Per-slice lumen centres recorded on one modality's stack.
class LandmarkSeries {
 public:
  LandmarkSeries() = default;
  /// Throws InvalidInput unless slice indices are unique and increasing.
  LandmarkSeries(Modality modality, std::vector<SliceLandmark> entries);

  Modality modality() const noexcept { return modality_; }
  const std::vector<SliceLandmark>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  Modality modality_ = Modality::Trus;
  std::vector<SliceLandmark> entries_;
};

inline constexpr double kDefaultMatchTolerance = 2.5;

struct UrethraSliceDistance {
  int slice_index = 0;
  double z = 0.0;
  double distance = 0.0;      // 3-D, MRI frame
  double in_plane = 0.0;      // component parallel to the TRUS plane
  std::size_t mri_index = 0;  // matched MRI centre
  double plane_offset = 0.0;  // distance of the matched centre to the plane
};

struct UrethraResult {
  std::vector<UrethraSliceDistance> slices;
  ResidualStats stats;
};

/// Each TRUS centre is lifted to 3-D and mapped by f. Its MRI partner is the
/// centre closest to that TRUS plane once pulled back through f^-1 (ties to
/// the lower index); farther than `match_tolerance` throws UnmatchedSlice.
UrethraResult urethra_distance(const LandmarkSeries& trus, std::span<const Point3> mri_centers,
                               const FusionTransform& f, double match_tolerance = kDefaultMatchTolerance);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
};

/// Ordinary least squares of y on x; needs 3 or more samples.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Slope (mm per slice) of the per-slice distance against slice index,
/// ordered apex (lowest index) to base.
double apical_gradient(std::span<const std::pair<int, double>> series);

/// Shoelace area in cm^2.
double slice_area(const PlanarContour& c);

struct SliceSurfaceDiff {
  int slice_index = 0;
  double area_a = 0.0;  // cm^2, 0 when the slice is absent
  double area_b = 0.0;
  double signed_diff = 0.0;  // b - a
  double absolute_diff = 0.0;
};

struct SurfaceDiff {
  std::vector<SliceSurfaceDiff> slices;
  SummaryStats signed_stats;
  SummaryStats absolute_stats;
};

/// Per-slice area differences over the union of slice indices.
SurfaceDiff surface_diff(const ContourStack& a, const ContourStack& b);

struct SliceCountDelta {
  int apex = 0;
  int base = 0;
};

/// Slices gained (positive) or lost (negative) below the lowest and above
/// the highest slice of `before`. Stacks must share modality and spacing.
SliceCountDelta slice_count_delta(const ContourStack& before, const ContourStack& after);

}  // namespace mrtrus
