#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mrtrus/types.hpp"

namespace mrtrus {

/// Signed shoelace area (mm^2), positive for counter-clockwise polygons.
double signed_polygon_area(std::span<const Point2> poly);
inline double polygon_area(std::span<const Point2> poly) { return std::abs(signed_polygon_area(poly)); }

/// Even-odd rule.
bool point_in_polygon(std::span<const Point2> poly, const Point2& p);

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d);
bool is_simple_polygon(std::span<const Point2> poly);

/// Distance from p to the closed polygon boundary.
double distance_to_polygon_boundary(std::span<const Point2> poly, const Point2& p);

/// Outward miter offset of a convex-ish polygon by `distance` mm.
std::vector<Point2> offset_polygon(std::span<const Point2> poly, double distance);

}  // namespace mrtrus
