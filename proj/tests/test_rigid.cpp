#include <doctest.h>

#include <random>

#include "mrtrus/error.hpp"
#include "mrtrus/phantom.hpp"
#include "mrtrus/rigid_registration.hpp"
#include "support.hpp"

using namespace mrtrus;

namespace {

PhantomSpec triaxial(std::uint64_t seed, double noise) {
  PhantomSpec s;
  s.semi_axes = {25, 17, 20};
  s.noise_sigma = noise;
  s.rng_seed = seed;
  return s;
}

double recovery_rms(const RigidTransform& got, const RigidTransform& truth, const PointCloud& src) {
  double sum = 0.0;
  for (const auto& p : src.points()) sum += (got.apply(p) - truth.apply(p)).squaredNorm();
  return std::sqrt(sum / src.size());
}

DistanceMap surface_map(const PointCloud& target) {
  return DistanceMap::build(target, DistanceMap::kDefaultCellSize, DistanceMap::kDefaultMargin, DistanceMode::Surface);
}

bool non_increasing(const std::vector<double>& h) {
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] > h[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("preregister aligns centroids") {
  const PointCloud a({{0, 0, 0}, {2, 0, 0}, {0, 2, 0}}, 1.0);
  CHECK(preregister(a, a).translation().norm() == 0.0);
  CHECK(preregister(a, a).rotation().isApprox(Eigen::Quaterniond::Identity()));
  std::vector<Point3> shifted;
  for (const auto& p : a.points()) shifted.push_back(p + Vec3(-5, 2, 0));
  CHECK((preregister(PointCloud(shifted, 1.0), a).translation() - Vec3(5, -2, 0)).norm() < 1e-12);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<Point3> s, d;
    for (int i = 0; i < 20; ++i) s.push_back(testing::random_vec(rng, -10, 10));
    for (int i = 0; i < 35; ++i) d.push_back(testing::random_vec(rng, -30, 30));
    const PointCloud src(s, 1.0), dst(d, 1.0);
    const auto t0 = preregister(src, dst);
    Vec3 c = Vec3::Zero();
    for (const auto& p : s) c += t0.apply(p);
    CHECK((c / s.size() - dst.centroid()).norm() < 1e-9);
  }
  CHECK_THROWS_AS(preregister(PointCloud(), a), Error);
}

TEST_CASE("energy examples") {
  std::vector<Point3> grid;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) grid.emplace_back(i, j, 0);
  const auto map = DistanceMap::build(PointCloud(grid, 1.0), 1.0, 5.0);
  const FusionTransform id{};
  CHECK(energy(id, PointCloud({{0, 0, 0}, {1, 2, 0}}, 1.0), map) == 0.0);
  CHECK(energy(id, PointCloud({{0, 0, 2}}, 1.0), map) == doctest::Approx(4.0));
  CHECK(energy(id, PointCloud({{0, 0, 1}, {1, 1, 2}}, std::vector<double>{1.0, 2.0}), map) == doctest::Approx(2.0));
}

TEST_CASE("sum of squared residuals equals the energy when sigma is 1") {
  const auto scene = generate_phantom(triaxial(3, 1.0));
  const auto map = surface_map(scene.mri_cloud);
  const auto src = cloud_from_stack(scene.trus_stack);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    const FusionTransform f{testing::random_rigid(rng, 20, 5) * scene.ground_truth.rigid, std::nullopt};
    const auto stats = residual_stats(src, map, f);
    double sum = 0.0;
    for (double d : stats.per_point) sum += d * d;
    const double e = energy(f, src, map);
    CHECK(std::abs(sum - e) <= 1e-9 * e);
  }
}

TEST_CASE("noise-free registration on target samples is already optimal") {
  const auto pts = testing::ellipsoid_points(4000, {25, 17, 20});
  const auto map = DistanceMap::build(PointCloud(pts, 1.0));
  std::vector<Point3> src;
  for (int i = 0; i < 4000; i += 13) src.push_back(pts[i]);
  const auto r = register_rigid(PointCloud(src, 1.0), map);
  CHECK(r.stats.mean <= 0.25 * map.cell_size());
  CHECK(non_increasing(r.summary.cost_history));
}

TEST_CASE("rigid registration recovers a known motion on noise-free phantoms") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    CAPTURE(seed);
    const auto scene = generate_phantom(triaxial(seed, 0.0));
    const auto map = surface_map(scene.mri_cloud);
    const auto src = cloud_from_stack(scene.trus_stack);
    const auto r = register_rigid(src, map);
    CHECK(recovery_rms(r.transform, scene.ground_truth.rigid, src) <= 0.3);
    CHECK(non_increasing(r.summary.cost_history));
    CHECK(r.summary.final_cost <= r.summary.initial_cost);
  }
}

TEST_CASE("noisy registration lands in the noise regime") {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    CAPTURE(seed);
    const auto scene = generate_phantom(triaxial(seed, 0.5));
    const auto map = surface_map(scene.mri_cloud);
    const auto r = register_rigid(cloud_from_stack(scene.trus_stack), map);
    CHECK(r.stats.mean >= 0.3);
    CHECK(r.stats.mean <= 0.8);
  }
  // clinical-scale noise: mean residual within [0.5, 1.5] x noise
  const auto scene = generate_phantom(triaxial(31, 1.5));
  const auto r = register_rigid(cloud_from_stack(scene.trus_stack), surface_map(scene.mri_cloud));
  CHECK(r.stats.mean >= 0.5 * 1.5);
  CHECK(r.stats.mean <= 1.5 * 1.5);
}

TEST_CASE("final residual is invariant under a common rigid motion") {
  const auto scene = generate_phantom(triaxial(41, 0.5));
  const auto src = cloud_from_stack(scene.trus_stack);
  const auto base = register_rigid(src, surface_map(scene.mri_cloud));
  std::mt19937_64 rng(4);
  const auto extra = testing::random_rigid(rng, 30, 20);
  std::vector<Point3> s2, t2;
  for (const auto& p : src.points()) s2.push_back(extra.apply(p));
  for (const auto& p : scene.mri_cloud.points()) t2.push_back(extra.apply(p));
  const auto moved = register_rigid(PointCloud(s2, 1.0), surface_map(PointCloud(t2, 1.0)));
  CHECK(std::abs(moved.stats.mean - base.stats.mean) <= 0.05);
}

TEST_CASE("registration is deterministic") {
  const auto scene = generate_phantom(triaxial(51, 1.0));
  const auto map = surface_map(scene.mri_cloud);
  const auto src = cloud_from_stack(scene.trus_stack);
  const auto a = register_rigid(src, map), b = register_rigid(src, map);
  CHECK(a.transform.rotation().coeffs() == b.transform.rotation().coeffs());
  CHECK(a.transform.translation() == b.transform.translation());
}

TEST_CASE("rigid registration preconditions") {
  const auto map = DistanceMap::build(PointCloud(testing::ellipsoid_points(200, {10, 10, 10}), 1.0));
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ParseError;
  };
  const PointCloud five(std::vector<Point3>(testing::ellipsoid_points(5, {9, 9, 9})), 1.0);
  CHECK(kind([&] { register_rigid(five, map); }) == ErrorKind::InsufficientData);
  RegistrationConfig bad;
  bad.lm_lambda_factor = 1.0;
  const PointCloud ok(testing::ellipsoid_points(50, {9, 9, 9}), 1.0);
  CHECK(kind([&] { register_rigid(ok, map, bad); }) == ErrorKind::InvalidConfig);
  const PointCloud huge(testing::ellipsoid_points(50, {9, 9, 9}), std::vector<double>(50, 1e-300));
  CHECK(kind([&] { register_rigid(huge, map); }) == ErrorKind::NonFinite);
}
