#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mrtrus/error.hpp"
#include "mrtrus/geometry.hpp"
#include "mrtrus/io.hpp"
#include "mrtrus/phantom.hpp"
#include "support.hpp"

using namespace mrtrus;

namespace {

PhantomSpec clean_spec(std::uint64_t seed = 1) {
  PhantomSpec s;
  s.noise_sigma = 0.0;
  s.rng_seed = seed;
  return s;
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

TEST_CASE("noise-free TRUS and MRI points lie on the ellipsoid") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto spec = clean_spec(seed);
    spec.center = Point3(3, -2, 1);
    spec.semi_axes = Vec3(24, 18, 21);
    const auto scene = generate_phantom(spec);
    double worst = 0.0;
    for (const auto& c : scene.trus_stack.contours())
      for (const auto& p : c.points)
        worst = std::max(worst, std::abs(ellipsoid_residual(spec, scene.ground_truth.apply({p.x(), p.y(), c.z}))));
    for (const auto& p : scene.mri_cloud.points()) worst = std::max(worst, std::abs(ellipsoid_residual(spec, p)));
    for (const auto& stack : scene.mri_stacks)
      for (const auto& c : stack.contours())
        for (const auto& p : c.points)
          worst = std::max(worst, std::abs(ellipsoid_residual(spec, stack_to_frame(stack.modality(), p.x(), p.y(), c.z))));
    CHECK(worst <= 1e-9);
  }
  // identity ground truth: the TRUS frame is the MRI frame
  auto spec = clean_spec();
  spec.max_rotation_deg = 0.0;
  spec.max_translation_mm = 0.0;
  const auto scene = generate_phantom(spec);
  CHECK(scene.ground_truth.rigid.translation().norm() == 0.0);
  for (const auto& c : scene.trus_stack.contours())
    for (const auto& p : c.points) CHECK(std::abs(ellipsoid_residual(spec, {p.x(), p.y(), c.z})) <= 1e-9);
}

TEST_CASE("default phantom has clinical proportions") {
  const auto scene = generate_phantom(PhantomSpec{});
  const auto m = cloud_from_stack(scene.trus_stack).size();
  CHECK(scene.mri_cloud.size() == 4000);
  CHECK(scene.trus_stack.size() >= 7);
  CHECK(scene.trus_stack.size() <= 10);
  CHECK(m >= 150);
  CHECK(m <= 400);
  CHECK(scene.mri_cloud.size() >= 10 * m);
  CHECK(scene.mri_stacks.size() == 3);
  CHECK(scene.trus_landmarks.size() == scene.trus_stack.size());
  CHECK(scene.mri_landmarks.size() == scene.trus_stack.size());
  CHECK(scene.trus_stack.spacing() == 5.0);
  CHECK(scene.mri_stacks[0].spacing() == 3.0);
  const double angle = 2.0 * std::acos(std::min(1.0, std::abs(scene.ground_truth.rigid.rotation().w())));
  CHECK(angle <= 15.0 * std::numbers::pi / 180.0 + 1e-12);
  CHECK(scene.ground_truth.rigid.translation().norm() <= 10.0 + 1e-12);
  CHECK_FALSE(scene.ground_truth.ffd.has_value());
}

TEST_CASE("same seed gives identical scenes, another seed does not") {
  const auto a = generate_phantom(PhantomSpec{});
  const auto b = generate_phantom(PhantomSpec{});
  CHECK(encode_contour_stack(a.trus_stack) == encode_contour_stack(b.trus_stack));
  CHECK(encode_transform(a.ground_truth) == encode_transform(b.ground_truth));
  CHECK(encode_volume_raw(a.mri_volume) == encode_volume_raw(b.mri_volume));
  CHECK(encode_landmarks(a.trus_landmarks) == encode_landmarks(b.trus_landmarks));
  CHECK(encode_seeds(a.seeds) == encode_seeds(b.seeds));
  PhantomSpec other;
  other.rng_seed = 2;
  CHECK(encode_transform(generate_phantom(other).ground_truth) != encode_transform(a.ground_truth));
}

TEST_CASE("lumen centres follow the urethra axis") {
  const auto spec = clean_spec(4);
  const auto scene = generate_phantom(spec);
  for (std::size_t i = 0; i < scene.trus_landmarks.size(); ++i) {
    const auto& e = scene.trus_landmarks.entries()[i];
    const Point3 mapped = scene.ground_truth.apply({e.center.x(), e.center.y(), e.z});
    CHECK((mapped - scene.mri_landmarks[i]).norm() <= 1e-6);
    CHECK((scene.mri_landmarks[i] - urethra_axis(spec, scene.mri_landmarks[i].z())).norm() <= 1e-12);
    CHECK(e.z == scene.trus_stack.contours()[i].z);
  }
  // the bow: offset at mid-gland, zero at the poles
  CHECK(urethra_axis(spec, 0.0).y() == doctest::Approx(spec.urethra_offset));
  CHECK(urethra_axis(spec, spec.semi_axes.z()).y() == doctest::Approx(0.0));
}

TEST_CASE("noise perturbs TRUS data only and keeps contours simple") {
  PhantomSpec spec;
  spec.noise_sigma = 1.0;
  const auto noisy = generate_phantom(spec);
  spec.noise_sigma = 0.0;
  const auto clean = generate_phantom(spec);
  CHECK(encode_transform(noisy.ground_truth) == encode_transform(clean.ground_truth));
  CHECK(encode_contour_stack(noisy.mri_stacks[1]) == encode_contour_stack(clean.mri_stacks[1]));
  CHECK(encode_contour_stack(noisy.trus_stack) != encode_contour_stack(clean.trus_stack));
  double sum = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < clean.trus_stack.size(); ++k) {
    const auto& a = clean.trus_stack.contours()[k].points;
    const auto& b = noisy.trus_stack.contours()[k].points;
    REQUIRE(a.size() == b.size());
    CHECK(is_simple_polygon(b));
    for (std::size_t i = 0; i < a.size(); ++i, ++n) sum += (a[i] - b[i]).squaredNorm();
  }
  // 2-D isotropic noise: E|d|^2 = 2 sigma^2
  CHECK(std::sqrt(sum / n) == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
}

TEST_CASE("MRI-like volume and seeds") {
  const auto spec = clean_spec();
  const auto scene = generate_phantom(spec);
  const auto& v = scene.mri_volume;
  CHECK(v.spacing().z() == spec.mri_spacing);
  auto at_world = [&](const Point3& p) {
    const Vec3 u = v.to_voxel(p);
    return v.at(static_cast<int>(std::lround(u.x())), static_cast<int>(std::lround(u.y())),
                static_cast<int>(std::lround(u.z())));
  };
  CHECK(at_world({15, 0, 0}) == 200.0f);    // gland interior
  CHECK(at_world({0, 0, 0}) == 200.0f);     // the lumen is bowed away from the centre at mid-gland
  CHECK(at_world({0, 4, 0}) == 30.0f);
  CHECK(at_world({1, 5, 0}) == 30.0f);
  CHECK(at_world({0, 0, 27}) == 60.0f);     // outside
  const auto [lo, hi] = v.intensity_range();
  CHECK(lo == 30.0f);
  CHECK(hi == 200.0f);
  CHECK_FALSE(scene.seeds.seeds.empty());
  for (const auto& s : scene.seeds.seeds) {
    CHECK(ellipsoid_residual(spec, scene.ground_truth.apply(s.position)) < 0.0);
    CHECK(s.strength == spec.seed_strength);
  }
}

TEST_CASE("phantom spec validation and text round trip") {
  CHECK(kind_of([] {
          PhantomSpec s;
          s.semi_axes.x() = 0.0;
          s.validate();
        }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] {
          PhantomSpec s;
          s.trus_spacing = -1.0;
          generate_phantom(s);
        }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { parse_phantom_spec("semi_axes=1,2\n"); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { parse_phantom_spec("bogus=1\n"); }) == ErrorKind::InvalidSpec);

  PhantomSpec s;
  s.semi_axes = {22.5, 19, 18.25};
  s.center = {1, 2, 3};
  s.noise_sigma = 0.5;
  s.rng_seed = 77;
  const auto back = parse_phantom_spec(encode_phantom_spec(s));
  CHECK(back.semi_axes == s.semi_axes);
  CHECK(back.center == s.center);
  CHECK(back.noise_sigma == 0.5);
  CHECK(back.rng_seed == 77u);
  CHECK(encode_phantom_spec(back) == encode_phantom_spec(s));
}

TEST_CASE("known deformations") {
  DeformationSpec d;
  d.center = {10, 0, 0};
  d.amplitude = 0.0;
  CHECK(deform_point({3, 4, 5}, d) == Point3(3, 4, 5));
  d.amplitude = 4.0;
  d.width = 10.0;
  CHECK(deform_point(d.center, d) == d.center);
  const Point3 p(10, 10, 0);
  CHECK((deform_point(p, d) - p).norm() == doctest::Approx(4.0 / std::numbers::e));
  CHECK((deform_point(p, d) - p).normalized().isApprox(Vec3(0, 1, 0)));
  DeformationSpec r;
  r.kind = DeformationSpec::Kind::Rigid;
  r.rigid = random_rigid(5, 10, 5);
  CHECK((deform_point(p, r) - r.rigid.apply(p)).norm() == 0.0);
  CHECK(kind_of([&] { d.validate(5.0); }) == ErrorKind::InvalidSpec);  // 4 >= 5/2
  d.validate(20.0);
  const PointCloud cloud({{0, 0, 0}, {10, 10, 0}}, std::vector<double>{1.0, 2.0});
  const auto moved = apply_known_deformation(cloud, d);
  CHECK(moved.sigmas() == cloud.sigmas());
  CHECK(moved.points()[1] == deform_point({10, 10, 0}, d));
}

TEST_CASE("random rigid motions stay within bounds") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = random_rigid(seed, 15, 10);
    const double angle = 2.0 * std::acos(std::min(1.0, std::abs(t.rotation().w())));
    CHECK(angle <= 15.0 * std::numbers::pi / 180.0 + 1e-9);
    CHECK(t.translation().norm() <= 10.0 + 1e-9);
  }
  CHECK(random_rigid(3, 15, 10).translation() == random_rigid(3, 15, 10).translation());
}

TEST_CASE("scene files are written") {
  const auto dir = testing::temp_dir("phantom_scene");
  const auto scene = generate_phantom(PhantomSpec{});
  write_phantom_scene(scene, dir);
  for (const char* f : {SceneFiles::kTrus, SceneFiles::kMriTransverse, SceneFiles::kMriSagittal, SceneFiles::kMriCoronal,
                        SceneFiles::kVolume, SceneFiles::kTrusLandmarks, SceneFiles::kMriLandmarks, SceneFiles::kSeeds,
                        SceneFiles::kGroundTruth, SceneFiles::kSpec, SceneFiles::kSession})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(encode_contour_stack(read_contour_stack(dir / SceneFiles::kTrus)) == encode_contour_stack(scene.trus_stack));
  const auto session = decode_session(read_file(dir / SceneFiles::kSession), dir);
  session.check_files();
  std::filesystem::remove_all(dir);
}
