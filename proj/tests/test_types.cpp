#include <doctest.h>

#include <random>

#include "mrtrus/error.hpp"
#include "mrtrus/types.hpp"
#include "support.hpp"

using namespace mrtrus;
using testing::circle;
using testing::square;

TEST_CASE("cloud_from_stack embeds vertices slice-major") {
  SUBCASE("single square at z=0") {
    ContourStack s(Modality::Trus, 5.0, {{0, 0.0, square(1.0)}});
    const auto cloud = cloud_from_stack(s);
    REQUIRE(cloud.size() == 4);
    for (const auto& p : cloud.points()) CHECK(p.z() == 0.0);
    CHECK(cloud.sigmas() == std::vector<double>(4, kDefaultSigma));
  }
  SUBCASE("square (+-10, +-10) at z=5") {
    ContourStack s(Modality::Trus, 5.0, {{1, 5.0, square(10.0)}});
    const auto cloud = cloud_from_stack(s);
    CHECK(cloud.points()[0] == Point3(-10, -10, 5));
    CHECK(cloud.points()[2] == Point3(10, 10, 5));
  }
  SUBCASE("order follows z, then vertex order; pixel scale applies in-plane only") {
    ContourStack s(Modality::Trus, 5.0, {{1, 5.0, square(2.0)}, {0, 0.0, square(1.0)}});
    const auto cloud = cloud_from_stack(s, 0.5);
    REQUIRE(cloud.size() == 8);
    CHECK(cloud.points()[0] == Point3(-0.5, -0.5, 0));
    CHECK(cloud.points()[4] == Point3(-1, -1, 5));
  }
  SUBCASE("empty stack") {
    ContourStack s(Modality::Trus, 5.0, {});
    CHECK_THROWS_AS(cloud_from_stack(s), Error);
    try {
      cloud_from_stack(s);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyInput);
    }
  }
}

TEST_CASE("MRI stack frames are right-handed cyclic permutations") {
  for (Modality m : {Modality::MriTransverse, Modality::MriSagittal, Modality::MriCoronal}) {
    const Point3 ex = stack_to_frame(m, 1, 0, 0), ey = stack_to_frame(m, 0, 1, 0), ez = stack_to_frame(m, 0, 0, 1);
    CHECK(ex.cross(ey).isApprox(ez));
    const Point3 p(1.5, -2, 7);
    CHECK(frame_to_stack(m, stack_to_frame(m, p.x(), p.y(), p.z())) == p);
  }
  CHECK(stack_to_frame(Modality::MriSagittal, 1, 2, 3) == Point3(3, 1, 2));
  CHECK(stack_to_frame(Modality::MriCoronal, 1, 2, 3) == Point3(2, 3, 1));
}

TEST_CASE("merged 3-plane MRI cloud is much denser than the TRUS cloud") {
  auto stack = [](Modality m, double spacing, int n_slices, int n_pts) {
    std::vector<PlanarContour> cs;
    for (int k = 0; k < n_slices; ++k) cs.push_back({k, k * spacing, circle(15.0, n_pts)});
    return ContourStack(m, spacing, cs);
  };
  const auto trus = cloud_from_stack(stack(Modality::Trus, 5.0, 9, 36));
  std::vector<ContourStack> mri{stack(Modality::MriTransverse, 3, 13, 100), stack(Modality::MriSagittal, 3, 13, 100),
                                stack(Modality::MriCoronal, 3, 13, 100)};
  const auto merged = cloud_from_stacks(mri);
  CHECK(merged.size() == 3 * 13 * 100);
  CHECK(merged.size() > 10 * trus.size());
}

TEST_CASE("transform_point examples") {
  CHECK(transform_point(RigidTransform::identity(), Point3(1, 2, 3)) == Point3(1, 2, 3));
  const auto rz = RigidTransform::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2, Vec3::Zero());
  CHECK((transform_point(rz, Point3(1, 0, 0)) - Point3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("rigid transforms obey the group laws on random cases") {
  std::mt19937_64 rng(7);
  double worst_assoc = 0, worst_inv = 0, worst_norm = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = testing::random_rigid(rng, 180, 50);
    const auto b = testing::random_rigid(rng, 180, 50);
    const auto c = testing::random_rigid(rng, 180, 50);
    const Point3 p = testing::random_vec(rng, -100, 100);
    worst_assoc = std::max(worst_assoc, ((a * b).apply(p) - a.apply(b.apply(p))).norm());
    worst_assoc = std::max(worst_assoc, (((a * b) * c).apply(p) - (a * (b * c)).apply(p)).norm());
    worst_inv = std::max(worst_inv, (a.inverse().apply(a.apply(p)) - p).norm());
    worst_norm = std::max(worst_norm, std::abs((a * b).rotation().norm() - 1.0));
  }
  CHECK(worst_assoc <= 1e-9);
  CHECK(worst_inv <= 1e-9);
  CHECK(worst_norm <= 1e-9);
}

TEST_CASE("contour and stack invariants are enforced") {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::EmptyInput;
  };
  CHECK(kind_of([] { validate_contour({0, 0, {{0, 0}, {1, 0}}}); }) == ErrorKind::DegeneratePolygon);
  CHECK(kind_of([] { validate_contour({0, 0, {{0, 0}, {1, 0}, {1, 0}, {0, 1}}}); }) == ErrorKind::InvalidInput);
  // bow tie
  CHECK(kind_of([] { validate_contour({0, 0, {{0, 0}, {1, 1}, {1, 0}, {0, 1}}}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { ContourStack(Modality::Trus, 5, {{0, 0, square(1)}, {1, 6, square(1)}}); }) ==
        ErrorKind::InvalidInput);
  CHECK(kind_of([] { ContourStack(Modality::Trus, 0, {}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { PointCloud({Point3::Zero()}, std::vector<double>{0.0}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { PointCloud({Point3::Zero()}, std::vector<double>{}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { VolumeGrid({2, 2, 2}, Vec3::Ones(), Point3::Zero(), std::vector<float>(7)); }) ==
        ErrorKind::DimensionMismatch);
}

TEST_CASE("stack editing keeps the stack contiguous") {
  ContourStack s(Modality::Trus, 5, {{0, 0, square(5)}, {1, 5, square(6)}, {2, 10, square(5)}});
  CHECK(s.z_of(-1) == -5.0);
  CHECK(s.z_of(4) == 20.0);
  const auto grown = s.with_contour({-1, -5, square(3)});
  CHECK(grown.size() == 4);
  CHECK(grown.contours().front().slice_index == -1);
  CHECK(s.without_slice(2).size() == 2);
  CHECK_THROWS_AS(s.with_contour({5, 25, square(3)}), Error);  // leaves a gap
  CHECK_THROWS_AS(s.without_slice(1), Error);                 // punches a hole
}
