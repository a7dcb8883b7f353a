#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "mrtrus/error.hpp"
#include "mrtrus/geometry.hpp"
#include "mrtrus/volumetry.hpp"
#include "support.hpp"

using namespace mrtrus;

namespace {

ContourStack square_stack(std::vector<double> halves, double spacing) {
  std::vector<PlanarContour> cs;
  for (std::size_t k = 0; k < halves.size(); ++k)
    cs.push_back({static_cast<int>(k), k * spacing, testing::square(halves[k])});
  return ContourStack(Modality::Trus, spacing, cs);
}

/// Sphere of radius R (mm) as circles on slices at integer multiples of `spacing`.
ContourStack sphere_stack(double R, double spacing, double grow = 0.0) {
  std::vector<PlanarContour> cs;
  const int n = static_cast<int>(std::floor(R / spacing));
  for (int k = -n; k <= n; ++k) {
    const double z = k * spacing;
    const double r = std::sqrt(std::max(R * R - z * z, 0.0));
    if (r < 0.5) continue;
    cs.push_back({k, z, testing::circle(r + grow, 128)});
  }
  return ContourStack(Modality::Trus, spacing, cs);
}

/// Radius (cm) at which a single seed delivers dose D.
double radius_for_dose(double D, double s, double mu) {
  double lo = 1e-6, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (s * std::exp(-mu * mid) / (mid * mid) > D ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::ParseError;
}

}  // namespace

TEST_CASE("volume formula analytic cases") {
  // prism: two 10 cm^2 slices 5 mm apart
  const double half = std::sqrt(1000.0) / 2.0;
  const double prism = stack_volume(square_stack({half, half}, 5.0));
  CHECK(std::abs(prism - 5.0) <= 1e-9 * 5.0);
  // square frustum 1 cm^2 -> 4 cm^2 over 3 cm is exactly (1 + 4 + 2) / 3 * 3 = 7 cc
  const double frustum = stack_volume(square_stack({5.0, 10.0}, 30.0));
  CHECK(std::abs(frustum - 7.0) <= 1e-9 * 7.0);
  // circular frustum pi -> 4 pi cm^2 over 3 cm: 7 pi cc (the polygon areas enter exactly)
  const ContourStack cone(Modality::Trus, 30.0, {{0, 0.0, testing::circle(10, 4096)}, {1, 30.0, testing::circle(20, 4096)}});
  CHECK(stack_volume(cone) == doctest::Approx(7.0 * std::numbers::pi).epsilon(1e-5));
  CHECK(stack_volume(square_stack({5.0, 10.0}, 30.0), VolumeFormula::Average) == doctest::Approx(7.5));
  CHECK(kind_of([] { stack_volume(square_stack({5.0}, 5.0)); }) == ErrorKind::InsufficientData);
}

TEST_CASE("percent change") {
  CHECK(percent_change(10, 10) == 0.0);
  CHECK(std::round(percent_change(65.92, 67.97) * 100.0) / 100.0 == doctest::Approx(3.11));
  CHECK(percent_change(100, 148.24) == doctest::Approx(48.24));
  CHECK(kind_of([] { percent_change(0.0, 1.0); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { percent_change(-2.0, 1.0); }) == ErrorKind::InvalidInput);
}

TEST_CASE("volume is monotone under slice-area growth") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(u(rng) * 10);
    std::vector<PlanarContour> cs;
    for (int k = 0; k < n; ++k) cs.push_back({k, 5.0 * k, testing::random_star(rng, 16, 5, 15)});
    const ContourStack s(Modality::Trus, 5.0, cs);
    const int grow = static_cast<int>(u(rng) * n);
    auto bigger = cs[grow];
    const double f = 1.0 + 0.5 * u(rng);
    for (auto& p : bigger.points) p *= f;
    const auto g = s.with_contour(bigger);
    for (auto formula : {VolumeFormula::Frustum, VolumeFormula::Average})
      CHECK(stack_volume(g, formula) >= stack_volume(s, formula));
  }
}

TEST_CASE("dose kernel") {
  SeedImplant none;
  CHECK(dose_at(none, {1, 2, 3}) == 0.0);
  const SeedImplant one{{{Point3::Zero(), 1.0}}};
  CHECK(dose_at(one, {20, 0, 0}, {0.0, 0.05}) == doctest::Approx(0.25));
  // capped at r_min
  CHECK(dose_at(one, Point3::Zero(), {0.0, 0.05}) == doctest::Approx(400.0));
  const SeedImplant two{{{Point3(0, 0, 0), 2.0}, {Point3(5, 1, 0), 3.0}}};
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const Point3 p = testing::random_vec(rng, -30, 30);
    const double sum = dose_at(SeedImplant{{two.seeds[0]}}, p) + dose_at(SeedImplant{{two.seeds[1]}}, p);
    CHECK(std::abs(dose_at(two, p) - sum) <= 1e-12 * sum);
  }
  CHECK(kind_of([] { SeedImplant{{{Point3::Zero(), 0.0}}}.validate(); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { DoseKernelConfig{-1.0, 0.05}.validate(); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { DoseKernelConfig{0.1, 0.0}.validate(); }) == ErrorKind::InvalidConfig);
  CHECK(kSimplifiedKernelBanner.find("not TG-43") != std::string_view::npos);
}

TEST_CASE("bins and DVH from doses") {
  const auto bins = parse_bins("0:300:1");
  CHECK(bins.size() == 301);
  CHECK(bins.back() == 300.0);
  CHECK(parse_bins("0:1:0.25") == std::vector<double>{0, 0.25, 0.5, 0.75, 1.0});
  CHECK(kind_of([] { parse_bins("0:10"); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { parse_bins("0:10:0"); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { parse_bins("5:1:1"); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { parse_bins("a:1:1"); }) == ErrorKind::InvalidInput);

  const std::vector<double> uniform(1000, 150.0);
  const auto c = dvh_from_doses(uniform, bins);
  CHECK(c.cumulative_fraction[150] == 1.0);
  CHECK(c.cumulative_fraction[151] == 0.0);
  // interpolated toward the empty bin above
  CHECK(d90(c) == doctest::Approx(150.1));

  DVHCurve lin;
  lin.dose_bins = bins;
  for (double b : bins) lin.cumulative_fraction.push_back(std::max(0.0, 1.0 - b / 200.0));
  CHECK(d90(lin) == doctest::Approx(20.0));
  CHECK(dose_at_fraction(lin, 0.5) == doctest::Approx(100.0));

  DVHCurve bad = lin;
  bad.cumulative_fraction[10] = 0.99;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidInput);
}

TEST_CASE("rasterization covers the stack volume") {
  const auto sphere = sphere_stack(20.0, 1.0);
  const auto pts = rasterize_stack(sphere, 1.0);
  const double v = static_cast<double>(pts.size()) / 1000.0;  // cc at 1 mm^3 per sample
  CHECK(v == doctest::Approx(4.0 / 3.0 * std::numbers::pi * 8.0).epsilon(0.03));
  for (const auto& p : pts) {
    CHECK(std::abs(p.z() - std::round(p.z())) < 1e-12);
    CHECK(p.norm() <= 20.5);
  }
  CHECK(kind_of([&] { rasterize_stack(sphere, 0.0); }) == ErrorKind::InvalidInput);
}

TEST_CASE("single centred seed matches the radial oracle") {
  const double R = 20.0;  // mm
  const auto sphere = sphere_stack(R, 1.0);
  const SeedImplant seed{{{Point3::Zero(), 40.0}}};
  const DoseKernelConfig kernel;
  const auto bins = parse_bins("0:400:2");
  const auto c = compute_dvh(seed, sphere, kernel, bins, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double r = std::min(radius_for_dose(bins[i], 40.0, kernel.mu_per_cm) * 10.0, R);
    const double analytic = bins[i] == 0.0 ? 1.0 : std::pow(r / R, 3.0);
    worst = std::max(worst, std::abs(c.cumulative_fraction[i] - analytic));
  }
  CHECK(worst <= 0.02);
  const auto coarse = compute_dvh(seed, sphere, kernel, bins, 2.0);
  CHECK(std::abs(d90(coarse) - d90(c)) <= 0.03 * d90(c));
}

TEST_CASE("dilating the target lowers D90 and keeps the DVH monotone") {
  SeedImplant seeds;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) seeds.seeds.push_back({Point3(10 * i, 10 * j, 10 * k), 40.0});
  const auto bins = parse_bins("0:300:1");
  const auto tight = sphere_stack(18.0, 1.0);
  const auto grown = sphere_stack(18.0, 1.0, 3.0);
  const auto a = compute_dvh(seeds, tight, {}, bins, 1.0);
  const auto b = compute_dvh(seeds, grown, {}, bins, 1.0);
  CHECK(d90(b) < d90(a));
  for (std::size_t i = 1; i < bins.size(); ++i) CHECK(a.cumulative_fraction[i] <= a.cumulative_fraction[i - 1]);

  const auto t0 = std::chrono::steady_clock::now();
  compute_dvh(seeds, sphere_stack(25.0, 1.0), {}, bins, 1.0);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
}
