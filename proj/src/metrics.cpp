#include "mrtrus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/geometry.hpp"

namespace mrtrus {

LandmarkSeries::LandmarkSeries(Modality modality, std::vector<SliceLandmark> entries)
    : modality_(modality), entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!std::isfinite(entries_[i].z) || !entries_[i].center.allFinite())
      throw Error(ErrorKind::InvalidInput, fmt::format("landmark {}: non-finite coordinate", i));
    if (i > 0 && entries_[i].slice_index <= entries_[i - 1].slice_index)
      throw Error(ErrorKind::InvalidInput, "landmark slice indices must be unique and increasing");
  }
}

UrethraResult urethra_distance(const LandmarkSeries& trus, std::span<const Point3> mri_centers,
                               const FusionTransform& f, double match_tolerance) {
  if (trus.empty()) throw Error(ErrorKind::EmptyInput, "no TRUS lumen centres");
  if (mri_centers.empty()) throw Error(ErrorKind::UnmatchedSlice, "no MRI lumen centres to match against");
  std::vector<Point3> pulled(mri_centers.size());
  for (std::size_t i = 0; i < mri_centers.size(); ++i) pulled[i] = f.inverse_apply(mri_centers[i]);

  UrethraResult out;
  std::vector<double> distances;
  for (const auto& e : trus.entries()) {
    std::size_t best = 0;
    double best_offset = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pulled.size(); ++i) {
      const double offset = std::abs(pulled[i].z() - e.z);
      if (offset < best_offset) {
        best_offset = offset;
        best = i;
      }
    }
    if (best_offset > match_tolerance)
      throw Error(ErrorKind::UnmatchedSlice,
                  fmt::format("slice {}: nearest MRI centre is {:.3f} mm from the plane (tolerance {})",
                              e.slice_index, best_offset, match_tolerance));
    const Point3 lifted(e.center.x(), e.center.y(), e.z);
    const Point3 mapped = f.apply(lifted);
    UrethraSliceDistance d;
    d.slice_index = e.slice_index;
    d.z = e.z;
    d.distance = (mapped - mri_centers[best]).norm();
    d.in_plane = (pulled[best] - lifted).head<2>().norm();
    d.mri_index = best;
    d.plane_offset = best_offset;
    out.slices.push_back(d);
    distances.push_back(d.distance);
  }
  out.stats = residual_summary(std::move(distances));
  return out;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "x and y differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorKind::InsufficientData, fmt::format("regression needs 3 samples, got {}", n));
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::InsufficientData, "regression needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  fit.slope_std_error = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return fit;
}

double apical_gradient(std::span<const std::pair<int, double>> series) {
  std::vector<std::pair<int, double>> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> x, y;
  for (const auto& [k, d] : sorted) {
    x.push_back(k);
    y.push_back(d);
  }
  return linear_fit(x, y).slope;
}

double slice_area(const PlanarContour& c) {
  if (c.points.size() < 3)
    throw Error(ErrorKind::DegeneratePolygon, fmt::format("slice {}: fewer than 3 points", c.slice_index));
  return polygon_area(c.points) / 100.0;
}

SurfaceDiff surface_diff(const ContourStack& a, const ContourStack& b) {
  std::map<int, SliceSurfaceDiff> rows;
  for (const auto& c : a.contours()) {
    auto& r = rows[c.slice_index];
    r.slice_index = c.slice_index;
    r.area_a = slice_area(c);
  }
  for (const auto& c : b.contours()) {
    auto& r = rows[c.slice_index];
    r.slice_index = c.slice_index;
    r.area_b = slice_area(c);
  }
  SurfaceDiff out;
  std::vector<double> signed_vals, abs_vals;
  for (auto& [k, r] : rows) {
    r.signed_diff = r.area_b - r.area_a;
    r.absolute_diff = std::abs(r.signed_diff);
    out.slices.push_back(r);
    signed_vals.push_back(r.signed_diff);
    abs_vals.push_back(r.absolute_diff);
  }
  out.signed_stats = summarize(signed_vals);
  out.absolute_stats = summarize(abs_vals);
  return out;
}

SliceCountDelta slice_count_delta(const ContourStack& before, const ContourStack& after) {
  if (before.modality() != after.modality())
    throw Error(ErrorKind::InvalidInput, fmt::format("stacks differ in modality ({} vs {})",
                                                     modality_name(before.modality()), modality_name(after.modality())));
  if (std::abs(before.spacing() - after.spacing()) > ContourStack::kSpacingTolerance)
    throw Error(ErrorKind::SpacingMismatch,
                fmt::format("spacing {} vs {}", before.spacing(), after.spacing()));
  if (before.empty() || after.empty()) throw Error(ErrorKind::EmptyInput, "slice count delta of an empty stack");
  const int b_lo = before.contours().front().slice_index;
  const int b_hi = before.contours().back().slice_index;
  const int a_lo = after.contours().front().slice_index;
  const int a_hi = after.contours().back().slice_index;
  auto count = [](const ContourStack& s, auto pred) {
    return static_cast<int>(std::count_if(s.contours().begin(), s.contours().end(),
                                          [&](const PlanarContour& c) { return pred(c.slice_index); }));
  };
  SliceCountDelta d;
  d.apex = count(after, [&](int k) { return k < b_lo; }) - count(before, [&](int k) { return k < a_lo; });
  d.base = count(after, [&](int k) { return k > b_hi; }) - count(before, [&](int k) { return k > a_hi; });
  return d;
}

}  // namespace mrtrus
