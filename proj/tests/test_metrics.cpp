#include <doctest.h>

#include <numbers>
#include <random>

#include "mrtrus/error.hpp"
#include "mrtrus/metrics.hpp"
#include "mrtrus/phantom.hpp"
#include "mrtrus/rigid_registration.hpp"
#include "support.hpp"

using namespace mrtrus;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::ParseError;
}

LandmarkSeries line_series(int count, double spacing, const Point2& c = Point2::Zero()) {
  std::vector<SliceLandmark> e;
  for (int k = 0; k < count; ++k) e.push_back({k, k * spacing, c});
  return LandmarkSeries(Modality::Trus, e);
}

}  // namespace

TEST_CASE("summary statistics") {
  const std::vector<double> v{1, 2, 3};
  const auto s = summarize(v);
  CHECK(s.mean == 2.0);
  CHECK(s.min == 1.0);
  CHECK(s.max == 3.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(kind_of([] { summarize(std::vector<double>{}); }) == ErrorKind::EmptyInput);

  std::vector<Point3> grid;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) grid.emplace_back(i, j, 0);
  const auto map = DistanceMap::build(PointCloud(grid, 1.0), 1.0, 3.0);
  const auto r = residual_stats(PointCloud({{1, 1, 0}, {2, 3, 0}, {4, 4, 0}}, 1.0), map, FusionTransform{});
  CHECK(r.mean == 0.0);
  CHECK(r.max == 0.0);
  CHECK(kind_of([&] { residual_stats(PointCloud(), map, FusionTransform{}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("urethra distance examples") {
  const auto trus = line_series(5, 5.0, {1, 2});
  std::vector<Point3> mri;
  for (const auto& e : trus.entries()) mri.emplace_back(e.center.x(), e.center.y(), e.z);
  auto r = urethra_distance(trus, mri, FusionTransform{});
  CHECK(r.slices.size() == 5);
  CHECK(r.stats.max == 0.0);
  for (auto& p : mri) p += Vec3(1, 0, 0);
  r = urethra_distance(trus, mri, FusionTransform{});
  for (const auto& s : r.slices) {
    CHECK(s.distance == doctest::Approx(1.0));
    CHECK(s.in_plane == doctest::Approx(1.0));
    CHECK(s.mri_index == static_cast<std::size_t>(s.slice_index));
  }
  // matching picks the centre nearest each plane, ties to the lower index
  const std::vector<Point3> tie{{0, 0, 2.5}, {0, 0, 7.5}};
  const auto t = urethra_distance(line_series(2, 5.0), tie, FusionTransform{}, 3.0);
  CHECK(t.slices[0].mri_index == 0);
  CHECK(t.slices[1].mri_index == 0);
  CHECK(kind_of([&] { urethra_distance(line_series(3, 5.0), tie, FusionTransform{}, 2.0); }) ==
        ErrorKind::UnmatchedSlice);
  CHECK(kind_of([&] { urethra_distance(LandmarkSeries(), tie, FusionTransform{}); }) == ErrorKind::EmptyInput);
  CHECK(kind_of([&] { urethra_distance(trus, std::vector<Point3>{}, FusionTransform{}); }) ==
        ErrorKind::UnmatchedSlice);
  CHECK(kind_of([] { LandmarkSeries(Modality::Trus, {{2, 0, {0, 0}}, {1, 1, {0, 0}}}); }) == ErrorKind::InvalidInput);
}

TEST_CASE("urethra distance on a noise-free tube phantom with the true transform") {
  PhantomSpec spec;
  spec.noise_sigma = 0.0;
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    spec.rng_seed = seed;
    const auto scene = generate_phantom(spec);
    const auto r = urethra_distance(scene.trus_landmarks, scene.mri_landmarks, scene.ground_truth);
    CHECK(r.stats.max <= 0.5);
  }
}

TEST_CASE("urethra distance is invariant under a common rigid motion") {
  PhantomSpec spec;
  spec.noise_sigma = 1.0;
  const auto scene = generate_phantom(spec);
  const FusionTransform f{scene.ground_truth.rigid * RigidTransform::from_axis_angle(Vec3(0, 0, 1), 0.02, Vec3(0.3, 0, 0)),
                          std::nullopt};
  const auto base = urethra_distance(scene.trus_landmarks, scene.mri_landmarks, f);
  std::mt19937_64 rng(8);
  const auto g = testing::random_rigid(rng, 40, 30);
  std::vector<Point3> moved;
  for (const auto& p : scene.mri_landmarks) moved.push_back(g.apply(p));
  const FusionTransform gf{g * f.rigid, std::nullopt};
  const auto again = urethra_distance(scene.trus_landmarks, moved, gf);
  REQUIRE(again.slices.size() == base.slices.size());
  for (std::size_t i = 0; i < base.slices.size(); ++i)
    CHECK(std::abs(again.slices[i].distance - base.slices[i].distance) <= 1e-6);
}

TEST_CASE("apical gradient and regression") {
  const std::vector<std::pair<int, double>> flat{{0, 2}, {1, 2}, {2, 2}, {3, 2}};
  CHECK(apical_gradient(flat) == doctest::Approx(0.0));
  const std::vector<std::pair<int, double>> down{{2, 1}, {0, 3}, {1, 2}};
  CHECK(apical_gradient(down) == doctest::Approx(-1.0));
  CHECK(kind_of([] { apical_gradient(std::vector<std::pair<int, double>>{{0, 1}, {1, 2}}); }) ==
        ErrorKind::InsufficientData);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.3);
  int inside = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x, y;
    for (int k = 0; k < 15; ++k) {
      x.push_back(k);
      y.push_back(4.0 - 0.2 * k + noise(rng));
    }
    const auto fit = linear_fit(x, y);
    if (std::abs(fit.slope + 0.2) <= 2.0 * fit.slope_std_error) ++inside;
  }
  CHECK(inside >= 88);  // ~95 % coverage of a 2-sigma interval
}

TEST_CASE("slice areas") {
  CHECK(slice_area({0, 0.0, testing::square(5.0)}) == doctest::Approx(1.0));
  auto rev = testing::square(5.0);
  std::reverse(rev.begin(), rev.end());
  CHECK(slice_area({0, 0.0, rev}) == doctest::Approx(1.0));
  const double a64 = slice_area({0, 0.0, testing::circle(20, 64)});
  CHECK(std::abs(a64 - std::numbers::pi * 4.0) <= 0.005 * std::numbers::pi * 4.0);
  // shoelace against an independent triangle-fan sum
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    const auto star = testing::random_star(rng, 24, 5, 15);
    double fan = 0.0;
    for (std::size_t i = 0; i < star.size(); ++i) {
      const Point2& a = star[i];
      const Point2& b = star[(i + 1) % star.size()];
      fan += 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
    }
    CHECK(slice_area({0, 0.0, star}) == doctest::Approx(fan / 100.0));
  }
  CHECK(kind_of([] { slice_area({0, 0.0, {{0, 0}, {1, 0}}}); }) == ErrorKind::DegeneratePolygon);
}

TEST_CASE("surface differences") {
  const auto a = testing::circle_stack(Modality::Trus, 5.0, 0, 4, [](int) { return 10.0; });
  auto d = surface_diff(a, a);
  CHECK(d.slices.size() == 4);
  CHECK(d.absolute_stats.max == 0.0);

  const auto one = ContourStack(Modality::Trus, 5.0, {{0, 0.0, testing::square(5.0)}});
  const auto two = ContourStack(Modality::Trus, 5.0, {{0, 0.0, testing::square(std::sqrt(50.0))}});
  d = surface_diff(one, two);
  CHECK(d.slices[0].signed_diff == doctest::Approx(1.0));
  CHECK(d.slices[0].absolute_diff == doctest::Approx(1.0));
  d = surface_diff(two, one);
  CHECK(d.slices[0].signed_diff == doctest::Approx(-1.0));

  // unmatched slices count their full area
  const auto extra = one.with_contour({1, 5.0, testing::square(5.0)});
  d = surface_diff(one, extra);
  REQUIRE(d.slices.size() == 2);
  CHECK(d.slices[1].area_a == 0.0);
  CHECK(d.slices[1].signed_diff == doctest::Approx(1.0));
  CHECK(d.signed_stats.mean == doctest::Approx(0.5));
  CHECK(d.absolute_stats.min == doctest::Approx(0.0));
}

TEST_CASE("slice count delta") {
  const auto base = testing::circle_stack(Modality::Trus, 5.0, 2, 5, [](int) { return 10.0; });
  CHECK(slice_count_delta(base, base).apex == 0);
  CHECK(slice_count_delta(base, base).base == 0);
  const auto apex = base.with_contour({1, 5.0, testing::circle(8, 24)});
  CHECK(slice_count_delta(base, apex).apex == 1);
  CHECK(slice_count_delta(base, apex).base == 0);
  CHECK(slice_count_delta(apex, base).apex == -1);
  // two more at each end
  auto both = base.with_contour({1, 5.0, testing::circle(8, 24)}).with_contour({0, 0.0, testing::circle(6, 24)});
  both = both.with_contour({7, 35.0, testing::circle(8, 24)}).with_contour({8, 40.0, testing::circle(6, 24)});
  const auto d = slice_count_delta(base, both);
  CHECK(d.apex == 2);
  CHECK(d.base == 2);
  const auto other = testing::circle_stack(Modality::Trus, 4.0, 2, 5, [](int) { return 10.0; });
  CHECK(kind_of([&] { slice_count_delta(base, other); }) == ErrorKind::SpacingMismatch);
  const auto mri = testing::circle_stack(Modality::MriTransverse, 5.0, 2, 5, [](int) { return 10.0; });
  CHECK(kind_of([&] { slice_count_delta(base, mri); }) == ErrorKind::InvalidInput);
}
