#include <doctest.h>

#include <random>

#include "mrtrus/elastic_registration.hpp"
#include "mrtrus/error.hpp"
#include "mrtrus/parallel.hpp"
#include "mrtrus/phantom.hpp"
#include "support.hpp"

using namespace mrtrus;

namespace {

struct Pair {
  PointCloud source;
  PointCloud target;
  RigidTransform truth;
};

/// Source: sparse ellipsoid samples; target: dense samples of the same
/// surface moved by `truth`, optionally bulged.
Pair ellipsoid_pair(std::uint64_t seed, std::optional<DeformationSpec> bulge = std::nullopt) {
  std::mt19937_64 rng(seed);
  const Vec3 semi(25, 17, 20);
  const RigidTransform truth = testing::random_rigid(rng, 15, 10);
  std::vector<Point3> src = testing::ellipsoid_points(300, semi);
  std::vector<Point3> dst;
  for (const auto& p : testing::ellipsoid_points(4000, semi)) dst.push_back(truth.apply(p));
  PointCloud target(dst, 1.0);
  if (bulge) {
    bulge->center = truth.apply(bulge->center);
    target = apply_known_deformation(target, *bulge);
  }
  return {PointCloud(src, 1.0), target, truth};
}

DistanceMap surface_map(const PointCloud& target) {
  return DistanceMap::build(target, DistanceMap::kDefaultCellSize, DistanceMap::kDefaultMargin, DistanceMode::Surface);
}

DeformationSpec bulge_at(const Point3& c) {
  DeformationSpec d;
  d.kind = DeformationSpec::Kind::GaussianBulge;
  d.center = c;
  d.amplitude = 4.0;
  d.width = 10.0;
  return d;
}

}  // namespace

TEST_CASE("rigidly moved target with the true motion as init stays near identity") {
  const auto pair = ellipsoid_pair(21);
  const auto map = surface_map(pair.target);
  const auto res = register_elastic(pair.source, map, pair.truth);
  REQUIRE(res.transform.ffd.has_value());
  CHECK(res.transform.ffd->max_displacement_norm() <= 0.5);
  CHECK(res.stats.mean <= 0.3);
  for (const auto& level : res.levels) {
    const auto& h = level.summary.cost_history;
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
  }
}

TEST_CASE("a gaussian bulge is absorbed better by the elastic stage") {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const auto pair = ellipsoid_pair(seed, bulge_at({25, 0, 0}));
    const auto map = surface_map(pair.target);
    const auto rigid = register_rigid(pair.source, map);
    const auto elastic = register_elastic(pair.source, map, rigid.transform);
    CHECK(elastic.stats.mean < rigid.stats.mean);
    CHECK(elastic.levels.size() >= 1);
  }
}

TEST_CASE("a huge regularization weight collapses to the rigid result") {
  const auto pair = ellipsoid_pair(41, bulge_at({0, 17, 0}));
  const auto map = surface_map(pair.target);
  const auto rigid = register_rigid(pair.source, map);
  ElasticOptions opt;
  opt.lambda = 1e9;
  const auto res = register_elastic(pair.source, map, rigid.transform, {}, opt);
  CHECK(res.transform.ffd->max_displacement_norm() <= 0.1);
  CHECK(std::abs(res.stats.mean - rigid.stats.mean) <= 0.1);
  for (std::size_t i = 0; i < res.stats.per_point.size(); ++i)
    CHECK(std::abs(res.stats.per_point[i] - rigid.stats.per_point[i]) <= 0.1);
}

TEST_CASE("data energy does not decrease as lambda grows") {
  const auto pair = ellipsoid_pair(51, bulge_at({0, 0, 20}));
  const auto map = surface_map(pair.target);
  const auto rigid = register_rigid(pair.source, map);
  // a fixed octree (no refinement) so each rung solves the same problem
  ElasticOptions opt;
  opt.refine_threshold = 1e9;
  double prev = -1.0;
  for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    opt.lambda = lambda;
    const auto res = register_elastic(pair.source, map, rigid.transform, {}, opt);
    CHECK(res.data_energy >= prev * (1.0 - 1e-6));
    prev = res.data_energy;
  }
}

TEST_CASE("elastic registration is deterministic and independent of thread count") {
  const auto pair = ellipsoid_pair(61, bulge_at({-25, 0, 0}));
  const auto map = surface_map(pair.target);
  const auto rigid = register_rigid(pair.source, map);
  set_thread_count(1);
  const auto a = register_elastic(pair.source, map, rigid.transform);
  set_thread_count(4);
  const auto b = register_elastic(pair.source, map, rigid.transform);
  set_thread_count(0);
  CHECK(a.data_energy == b.data_energy);
  CHECK(a.transform.ffd->free_values() == b.transform.ffd->free_values());
}

TEST_CASE("elastic preconditions") {
  const auto pair = ellipsoid_pair(71);
  const auto map = surface_map(pair.target);
  const PointCloud few(std::vector<Point3>(pair.source.points().begin(), pair.source.points().begin() + 5), 1.0);
  CHECK_THROWS_AS(register_elastic(few, map, pair.truth), Error);
  ElasticOptions bad;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(register_elastic(pair.source, map, pair.truth, {}, bad), Error);
  bad = {};
  bad.refine_threshold = 0.0;
  CHECK_THROWS_AS(register_elastic(pair.source, map, pair.truth, {}, bad), Error);
}
