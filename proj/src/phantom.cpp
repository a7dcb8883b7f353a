#include "mrtrus/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/geometry.hpp"
#include "mrtrus/io.hpp"
#include "mrtrus/parallel.hpp"

namespace mrtrus {

void PhantomSpec::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorKind::InvalidSpec, m); };
  if (!semi_axes.allFinite() || (semi_axes.array() <= 0.0).any()) bad("semi-axes must be positive");
  if (!center.allFinite()) bad("center must be finite");
  if (!(trus_spacing > 0.0) || !(mri_spacing > 0.0)) bad("spacings must be positive");
  if (!(urethra_radius > 0.0) || urethra_radius >= semi_axes.minCoeff() / 2) bad("urethra radius out of range");
  if (!(std::abs(urethra_offset) < semi_axes.y() / 2)) bad("urethra offset must stay within half the b semi-axis");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (mri_points < 100) bad("mri_points must be >= 100");
  if (!(trus_vertex_spacing > 0.0) || !(mri_vertex_spacing > 0.0)) bad("vertex spacings must be positive");
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 90.0)) bad("max_rotation_deg must be in [0, 90]");
  if (!(max_translation_mm >= 0.0)) bad("max_translation_mm must be >= 0");
  if (!(volume_pixel_mm > 0.0)) bad("volume_pixel_mm must be positive");
  if (!(seed_grid_mm > 0.0) || !(seed_strength > 0.0)) bad("seed grid and strength must be positive");
  if (2.0 * 0.97 * semi_axes.minCoeff() < trus_spacing) bad("gland too small for one TRUS slice spacing");
}

namespace {

Vec3 parse_triple(std::string_view key, const std::string& value) {
  Vec3 out;
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? value.find(',', pos) : value.size();
    if (end == std::string::npos) throw Error(ErrorKind::InvalidSpec, fmt::format("{} needs 3 comma-separated values", key));
    try {
      std::size_t used = 0;
      const std::string part = value.substr(pos, end - pos);
      out[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidSpec, fmt::format("{}: '{}' is not a number triple", key, value));
    }
    pos = end + 1;
  }
  return out;
}

double parse_number(std::string_view key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidSpec, fmt::format("{}: '{}' is not a number", key, value));
  }
}

}  // namespace

PhantomSpec parse_phantom_spec(std::string_view key_values) {
  PhantomSpec s;
  for (const auto& [k, v] : parse_key_values(key_values)) {
    if (k == "semi_axes") s.semi_axes = parse_triple(k, v);
    else if (k == "center") s.center = parse_triple(k, v);
    else if (k == "urethra_radius") s.urethra_radius = parse_number(k, v);
    else if (k == "urethra_offset") s.urethra_offset = parse_number(k, v);
    else if (k == "trus_spacing") s.trus_spacing = parse_number(k, v);
    else if (k == "mri_spacing") s.mri_spacing = parse_number(k, v);
    else if (k == "noise_sigma") s.noise_sigma = parse_number(k, v);
    else if (k == "rng_seed") s.rng_seed = static_cast<std::uint64_t>(parse_number(k, v));
    else if (k == "mri_points") s.mri_points = static_cast<int>(parse_number(k, v));
    else if (k == "trus_vertex_spacing") s.trus_vertex_spacing = parse_number(k, v);
    else if (k == "mri_vertex_spacing") s.mri_vertex_spacing = parse_number(k, v);
    else if (k == "max_rotation_deg") s.max_rotation_deg = parse_number(k, v);
    else if (k == "max_translation_mm") s.max_translation_mm = parse_number(k, v);
    else if (k == "volume_pixel_mm") s.volume_pixel_mm = parse_number(k, v);
    else if (k == "seed_grid_mm") s.seed_grid_mm = parse_number(k, v);
    else if (k == "seed_strength") s.seed_strength = parse_number(k, v);
    else throw Error(ErrorKind::InvalidSpec, fmt::format("unknown phantom key '{}'", k));
  }
  s.validate();
  return s;
}

std::string encode_phantom_spec(const PhantomSpec& s) {
  auto triple = [](const Vec3& v) {
    return fmt::format("{},{},{}", format_real(v.x()), format_real(v.y()), format_real(v.z()));
  };
  std::string out;
  out += fmt::format("semi_axes={}\n", triple(s.semi_axes));
  out += fmt::format("center={}\n", triple(s.center));
  out += fmt::format("urethra_radius={}\n", format_real(s.urethra_radius));
  out += fmt::format("urethra_offset={}\n", format_real(s.urethra_offset));
  out += fmt::format("trus_spacing={}\n", format_real(s.trus_spacing));
  out += fmt::format("mri_spacing={}\n", format_real(s.mri_spacing));
  out += fmt::format("noise_sigma={}\n", format_real(s.noise_sigma));
  out += fmt::format("rng_seed={}\n", s.rng_seed);
  out += fmt::format("mri_points={}\n", s.mri_points);
  out += fmt::format("trus_vertex_spacing={}\n", format_real(s.trus_vertex_spacing));
  out += fmt::format("mri_vertex_spacing={}\n", format_real(s.mri_vertex_spacing));
  out += fmt::format("max_rotation_deg={}\n", format_real(s.max_rotation_deg));
  out += fmt::format("max_translation_mm={}\n", format_real(s.max_translation_mm));
  out += fmt::format("volume_pixel_mm={}\n", format_real(s.volume_pixel_mm));
  out += fmt::format("seed_grid_mm={}\n", format_real(s.seed_grid_mm));
  out += fmt::format("seed_strength={}\n", format_real(s.seed_strength));
  return out;
}

double ellipsoid_residual(const PhantomSpec& spec, const Point3& p) {
  const Vec3 u = (p - spec.center).cwiseQuotient(spec.semi_axes);
  return u.squaredNorm() - 1.0;
}

Point3 urethra_axis(const PhantomSpec& spec, double z) {
  const double t = (z - spec.center.z()) / spec.semi_axes.z();
  return {spec.center.x(), spec.center.y() + spec.urethra_offset * (1.0 - t * t), z};
}

namespace {

RigidTransform draw_rigid(std::mt19937_64& rng, double max_rotation_deg, double max_translation_mm) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto direction = [&] {
    Vec3 v;
    do {
      v = Vec3(normal(rng), normal(rng), normal(rng));
    } while (v.norm() < 1e-6);
    return Vec3(v.normalized());
  };
  const Vec3 axis = direction();
  const double angle = unit(rng) * max_rotation_deg * std::numbers::pi / 180.0;
  const Vec3 dir = direction();
  const double length = unit(rng) * max_translation_mm;
  return RigidTransform::from_axis_angle(axis, angle, length * dir);
}

double ellipse_perimeter(double a, double b) {
  const double h = (a - b) * (a - b) / ((a + b) * (a + b));
  return std::numbers::pi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

int vertex_count(double perimeter, double spacing) {
  return std::max(8, static_cast<int>(std::lround(perimeter / spacing)));
}

std::vector<Point2> perturb_until_simple(const std::vector<Point2>& clean, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return clean;
  std::normal_distribution<double> noise(0.0, sigma);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Point2> pts = clean;
    for (auto& p : pts) p += Point2(noise(rng), noise(rng));
    if (is_simple_polygon(pts)) return pts;
  }
  throw Error(ErrorKind::InvalidSpec, "noise too large for the contour vertex spacing");
}

ContourStack mri_stack(const PhantomSpec& spec, Modality m) {
  const Vec3 semi = frame_to_stack(m, spec.semi_axes);
  const Vec3 c = frame_to_stack(m, spec.center);
  const int half = static_cast<int>(std::floor(0.97 * semi.z() / spec.mri_spacing));
  std::vector<PlanarContour> contours;
  for (int k = -half; k <= half; ++k) {
    const double dw = k * spec.mri_spacing;
    const double scale = std::sqrt(1.0 - (dw / semi.z()) * (dw / semi.z()));
    const double a = semi.x() * scale, b = semi.y() * scale;
    const int n = vertex_count(ellipse_perimeter(a, b), spec.mri_vertex_spacing);
    PlanarContour pc;
    pc.slice_index = k + half;
    pc.z = c.z() + dw;
    for (int j = 0; j < n; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n;
      pc.points.emplace_back(c.x() + a * std::cos(t), c.y() + b * std::sin(t));
    }
    contours.push_back(std::move(pc));
  }
  return ContourStack(m, spec.mri_spacing, std::move(contours));
}

}  // namespace

RigidTransform random_rigid(std::uint64_t seed, double max_rotation_deg, double max_translation_mm) {
  std::mt19937_64 rng(seed);
  return draw_rigid(rng, max_rotation_deg, max_translation_mm);
}

PhantomScene generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::seed_seq seq{spec.rng_seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  const RigidTransform truth = draw_rigid(rng, spec.max_rotation_deg, spec.max_translation_mm);
  const RigidTransform to_trus = truth.inverse();

  // dense MRI surface: Fibonacci lattice on the unit sphere, scaled
  std::vector<Point3> mri_pts;
  mri_pts.reserve(spec.mri_points);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < spec.mri_points; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / spec.mri_points;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    mri_pts.push_back(spec.center + Vec3(r * std::cos(phi), r * std::sin(phi), z).cwiseProduct(spec.semi_axes));
  }

  // the ellipsoid seen from the TRUS frame: (p - c')^T B (p - c') = 1
  const Eigen::Matrix3d R = truth.rotation().toRotationMatrix();
  const Eigen::Matrix3d A = spec.semi_axes.cwiseInverse().cwiseAbs2().asDiagonal();
  const Eigen::Matrix3d B = R.transpose() * A * R;
  const Point3 c_trus = to_trus.apply(spec.center);
  const Eigen::Matrix3d Binv = R.transpose() * Eigen::Matrix3d(A.diagonal().cwiseInverse().asDiagonal()) * R;
  const double half_extent = std::sqrt(Binv(2, 2));
  const int slice_count = static_cast<int>(std::floor(2.0 * 0.97 * half_extent / spec.trus_spacing)) + 1;
  const Eigen::Matrix2d B2 = B.topLeftCorner<2, 2>();
  const Eigen::Vector2d b = B.block<2, 1>(0, 2);
  const Eigen::Matrix2d B2inv = B2.inverse();

  std::vector<PlanarContour> trus_contours;
  std::vector<SliceLandmark> trus_marks;
  std::vector<Point3> mri_marks;
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  for (int k = 0; k < slice_count; ++k) {
    const double z = c_trus.z() + (k - 0.5 * (slice_count - 1)) * spec.trus_spacing;
    const double dz = z - c_trus.z();
    const Eigen::Vector2d uv0 = -dz * (B2inv * b);
    const double q0 = uv0.dot(B2 * uv0) + 2.0 * dz * uv0.dot(b) + dz * dz * B(2, 2);
    auto radius = [&](double t) {
      const Eigen::Vector2d d(std::cos(t), std::sin(t));
      return std::sqrt((1.0 - q0) / d.dot(B2 * d));
    };
    double perimeter = 0.0;
    Point2 prev = uv0 + radius(0.0) * Point2(1, 0);
    for (int j = 1; j <= 360; ++j) {
      const double t = 2.0 * std::numbers::pi * j / 360;
      const Point2 cur = uv0 + radius(t) * Point2(std::cos(t), std::sin(t));
      perimeter += (cur - prev).norm();
      prev = cur;
    }
    const int n = vertex_count(perimeter, spec.trus_vertex_spacing);
    std::vector<Point2> clean;
    for (int j = 0; j < n; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n;
      clean.push_back(c_trus.head<2>() + uv0 + radius(t) * Point2(std::cos(t), std::sin(t)));
    }
    trus_contours.push_back({k, z, perturb_until_simple(clean, spec.noise_sigma, rng)});

    // lumen centre: where the urethra axis crosses this TRUS plane
    auto plane_offset = [&](double s) { return to_trus.apply(urethra_axis(spec, s)).z() - z; };
    double lo = spec.center.z() - 2.0 * spec.semi_axes.z(), hi = spec.center.z() + 2.0 * spec.semi_axes.z();
    if (plane_offset(lo) > 0.0 || plane_offset(hi) < 0.0)
      throw Error(ErrorKind::InvalidSpec, "urethra axis does not cross every TRUS plane");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (plane_offset(mid) < 0.0 ? lo : hi) = mid;
    }
    const Point3 axis_mri = urethra_axis(spec, 0.5 * (lo + hi));
    const Point3 axis_trus = to_trus.apply(axis_mri);
    Point2 centre = axis_trus.head<2>();
    if (spec.noise_sigma > 0.0) centre += Point2(noise(rng), noise(rng));
    trus_marks.push_back({k, z, centre});
    mri_marks.push_back(axis_mri);
  }

  std::vector<ContourStack> stacks;
  for (Modality m : {Modality::MriTransverse, Modality::MriSagittal, Modality::MriCoronal})
    stacks.push_back(mri_stack(spec, m));

  // MRI-like intensity volume
  const Vec3 spacing(spec.volume_pixel_mm, spec.volume_pixel_mm, spec.mri_spacing);
  const Vec3 half = spec.semi_axes + Vec3::Constant(10.0);
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::floor(2.0 * half[a] / spacing[a])) + 1;
  const Point3 origin = spec.center - 0.5 * Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1).cwiseProduct(spacing);
  VolumeGrid volume(dims, spacing, origin);
  const double min_axis = spec.semi_axes.minCoeff();
  parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t k0, std::size_t k1) {
    for (int k = static_cast<int>(k0); k < static_cast<int>(k1); ++k)
      for (int j = 0; j < dims[1]; ++j)
        for (int i = 0; i < dims[0]; ++i) {
          const Point3 p = volume.to_world(i, j, k);
          const double rho = std::sqrt(ellipsoid_residual(spec, p) + 1.0);
          const double depth = (1.0 - rho) * min_axis;  // approx. mm inside the surface
          double v = 60.0 + 140.0 * std::clamp((depth + 1.0) / 2.0, 0.0, 1.0);
          if (depth > 0.0 && (p - urethra_axis(spec, p.z())).head<2>().norm() < spec.urethra_radius) v = 30.0;
          volume.at(i, j, k) = static_cast<float>(v);
        }
  });

  SeedImplant seeds;
  const int reach = static_cast<int>(std::ceil(spec.semi_axes.maxCoeff() / spec.seed_grid_mm));
  for (int k = -reach; k <= reach; ++k)
    for (int j = -reach; j <= reach; ++j)
      for (int i = -reach; i <= reach; ++i) {
        const Point3 p = c_trus + spec.seed_grid_mm * Vec3(i, j, k);
        if (ellipsoid_residual(spec, truth.apply(p)) + 1.0 <= 0.75 * 0.75) seeds.seeds.push_back({p, spec.seed_strength});
      }

  PhantomScene scene{spec,
                     PointCloud(std::move(mri_pts), kDefaultSigma),
                     std::move(volume),
                     std::move(stacks),
                     ContourStack(Modality::Trus, spec.trus_spacing, std::move(trus_contours)),
                     LandmarkSeries(Modality::Trus, std::move(trus_marks)),
                     std::move(mri_marks),
                     std::move(seeds),
                     FusionTransform{truth, std::nullopt}};
  return scene;
}

void DeformationSpec::validate(double min_semi_axis) const {
  if (kind != Kind::GaussianBulge) return;
  if (!(width > 0.0)) throw Error(ErrorKind::InvalidSpec, "bulge width must be positive");
  if (!std::isfinite(amplitude) || !center.allFinite()) throw Error(ErrorKind::InvalidSpec, "bulge must be finite");
  if (min_semi_axis > 0.0 && !(std::abs(amplitude) < min_semi_axis / 2))
    throw Error(ErrorKind::InvalidSpec, "bulge amplitude must stay below half the smallest semi-axis");
}

Point3 deform_point(const Point3& p, const DeformationSpec& spec) {
  if (spec.kind == DeformationSpec::Kind::Rigid) return spec.rigid.apply(p);
  const Vec3 d = p - spec.center;
  const double r = d.norm();
  if (r == 0.0) return p;
  return p + spec.amplitude * std::exp(-(r * r) / (spec.width * spec.width)) * (d / r);
}

PointCloud apply_known_deformation(const PointCloud& cloud, const DeformationSpec& spec) {
  spec.validate();
  std::vector<Point3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts.push_back(deform_point(p, spec));
  return PointCloud(std::move(pts), cloud.sigmas());
}

void write_phantom_scene(const PhantomScene& scene, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_contour_stack(dir / SceneFiles::kTrus, scene.trus_stack);
  write_contour_stack(dir / SceneFiles::kMriTransverse, scene.mri_stacks.at(0));
  write_contour_stack(dir / SceneFiles::kMriSagittal, scene.mri_stacks.at(1));
  write_contour_stack(dir / SceneFiles::kMriCoronal, scene.mri_stacks.at(2));
  write_volume(dir / SceneFiles::kVolume, scene.mri_volume);
  write_file(dir / SceneFiles::kTrusLandmarks, encode_landmarks(scene.trus_landmarks));
  write_file(dir / SceneFiles::kMriLandmarks, encode_landmarks(Modality::MriTransverse, scene.mri_landmarks));
  write_file(dir / SceneFiles::kSeeds, encode_seeds(scene.seeds));
  write_transform(dir / SceneFiles::kGroundTruth, scene.ground_truth);
  write_file(dir / SceneFiles::kSpec, encode_phantom_spec(scene.spec));
  SessionFile session;
  session.trus = SceneFiles::kTrus;
  session.mri_transverse = SceneFiles::kMriTransverse;
  session.mri_sagittal = SceneFiles::kMriSagittal;
  session.mri_coronal = SceneFiles::kMriCoronal;
  session.volume = SceneFiles::kVolume;
  session.trus_landmarks = SceneFiles::kTrusLandmarks;
  session.mri_landmarks = SceneFiles::kMriLandmarks;
  session.seeds = SceneFiles::kSeeds;
  write_file(dir / SceneFiles::kSession, encode_session(session));
}

}  // namespace mrtrus
