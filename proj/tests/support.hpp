#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "mrtrus/types.hpp"

namespace testing {

using mrtrus::Point2;
using mrtrus::Point3;
using mrtrus::Vec3;

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

inline mrtrus::RigidTransform random_rigid(std::mt19937_64& rng, double max_deg, double max_t) {
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  return mrtrus::RigidTransform::from_axis_angle(axis, u(rng) * max_deg * std::numbers::pi / 180.0,
                                                 random_vec(rng, -max_t, max_t));
}

/// Points on an axis-aligned ellipsoid surface, spread by a golden-angle spiral.
inline std::vector<Point3> ellipsoid_points(int n, const Vec3& semi, const Point3& c = Point3::Zero()) {
  std::vector<Point3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    out.push_back(c + Vec3(r * std::cos(golden * i), r * std::sin(golden * i), z).cwiseProduct(semi));
  }
  return out;
}

inline std::vector<Point2> circle(double r, int n, const Point2& c = Point2::Zero(), double phase = 0.0) {
  std::vector<Point2> out;
  for (int i = 0; i < n; ++i) {
    const double t = phase + 2.0 * std::numbers::pi * i / n;
    out.push_back(c + r * Point2(std::cos(t), std::sin(t)));
  }
  return out;
}

inline std::vector<Point2> square(double half, const Point2& c = Point2::Zero()) {
  return {c + Point2(-half, -half), c + Point2(half, -half), c + Point2(half, half), c + Point2(-half, half)};
}

/// Stack of circles; radius(k) gives the radius of slice k.
template <class F>
mrtrus::ContourStack circle_stack(mrtrus::Modality m, double spacing, int first, int count, F radius, int n = 48) {
  std::vector<mrtrus::PlanarContour> cs;
  for (int k = first; k < first + count; ++k) cs.push_back({k, k * spacing, circle(radius(k), n)});
  return mrtrus::ContourStack(m, spacing, std::move(cs));
}

/// Random star-shaped (hence simple) polygon.
inline std::vector<Point2> random_star(std::mt19937_64& rng, int n, double r_lo, double r_hi) {
  std::uniform_real_distribution<double> u(r_lo, r_hi);
  std::vector<Point2> out;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n;
    out.push_back(u(rng) * Point2(std::cos(t), std::sin(t)));
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mrtrus_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
