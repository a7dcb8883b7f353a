#include "mrtrus/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrtrus {

double signed_polygon_area(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

bool point_in_polygon(std::span<const Point2> poly, const Point2& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

double point_segment_distance(const Point2& a, const Point2& b, const Point2& p) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

}  // namespace

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

bool is_simple_polygon(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      // adjacent edges share a vertex by construction
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a, b, poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

double distance_to_polygon_boundary(std::span<const Point2> poly, const Point2& p) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    best = std::min(best, point_segment_distance(poly[i], poly[(i + 1) % n], p));
  return best;
}

std::vector<Point2> offset_polygon(std::span<const Point2> poly, double distance) {
  const std::size_t n = poly.size();
  std::vector<Point2> out;
  out.reserve(n);
  // outward normal of edge (a,b) is (dy, -dx) for a counter-clockwise polygon
  const double orientation = signed_polygon_area(poly) >= 0.0 ? 1.0 : -1.0;
  auto edge_normal = [&](const Point2& a, const Point2& b) -> Point2 {
    Point2 e = (b - a).normalized();
    return Point2(e.y(), -e.x()) * orientation;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& prev = poly[(i + n - 1) % n];
    const Point2& cur = poly[i];
    const Point2& next = poly[(i + 1) % n];
    const Point2 n0 = edge_normal(prev, cur);
    const Point2 n1 = edge_normal(cur, next);
    Point2 bis = n0 + n1;
    const double len = bis.norm();
    if (len < 1e-12) {
      out.push_back(cur + distance * n0);
      continue;
    }
    bis /= len;
    const double cos_half = std::max(bis.dot(n0), 0.2);
    out.push_back(cur + bis * (distance / cos_half));
  }
  return out;
}

}  // namespace mrtrus
