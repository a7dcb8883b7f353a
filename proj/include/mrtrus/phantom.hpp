#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "mrtrus/metrics.hpp"
#include "mrtrus/octree_spline.hpp"
#include "mrtrus/types.hpp"
#include "mrtrus/volumetry.hpp"

namespace mrtrus {

/// Synthetic prostate: an ellipsoid in the MRI frame with a curved urethra.
/// TRUS data are produced in their own frame, related to the MRI frame by a
/// random rigid ground truth (TRUS -> MRI).
struct PhantomSpec {
  Vec3 semi_axes{25.0, 20.0, 20.0};
  Point3 center = Point3::Zero();
  double urethra_radius = 2.5;
  double urethra_offset = 4.0;  // mm, posterior-anterior bow of the urethra axis at mid-gland
  double trus_spacing = 5.0;
  double mri_spacing = 3.0;
  double noise_sigma = 1.0;  // TRUS contours and lumen centres, per in-plane axis
  std::uint64_t rng_seed = 1;
  int mri_points = 4000;
  double trus_vertex_spacing = 3.0;
  double mri_vertex_spacing = 1.0;
  double max_rotation_deg = 15.0;
  double max_translation_mm = 10.0;
  double volume_pixel_mm = 1.0;
  double seed_grid_mm = 10.0;
  double seed_strength = 40.0;

  /// Throws InvalidSpec.
  void validate() const;
};

PhantomSpec parse_phantom_spec(std::string_view key_values);
std::string encode_phantom_spec(const PhantomSpec& spec);

struct PhantomScene {
  PhantomSpec spec;
  PointCloud mri_cloud;                // dense surface sampling
  VolumeGrid mri_volume;
  std::vector<ContourStack> mri_stacks;  // transverse, sagittal, coronal
  ContourStack trus_stack;
  LandmarkSeries trus_landmarks;
  std::vector<Point3> mri_landmarks;   // one per TRUS slice, MRI frame
  SeedImplant seeds;                   // TRUS frame
  FusionTransform ground_truth;        // TRUS -> MRI
};

PhantomScene generate_phantom(const PhantomSpec& spec);

/// Ellipsoid implicit value x^2/a^2 + y^2/b^2 + z^2/c^2 - 1 (MRI frame).
double ellipsoid_residual(const PhantomSpec& spec, const Point3& p);
/// Point on the urethra axis at height z (MRI frame).
Point3 urethra_axis(const PhantomSpec& spec, double z);

/// Rigid motion drawn uniformly: random axis, angle up to max_rotation_deg,
/// translation direction uniform with length up to max_translation_mm.
RigidTransform random_rigid(std::uint64_t seed, double max_rotation_deg, double max_translation_mm);

struct DeformationSpec {
  enum class Kind { Rigid, GaussianBulge };
  Kind kind = Kind::GaussianBulge;
  RigidTransform rigid;
  Point3 center = Point3::Zero();
  double amplitude = 4.0;  // mm
  double width = 10.0;     // mm

  /// amplitude must stay below half the smallest semi-axis when given.
  void validate(double min_semi_axis = 0.0) const;
};

Point3 deform_point(const Point3& p, const DeformationSpec& spec);
PointCloud apply_known_deformation(const PointCloud& cloud, const DeformationSpec& spec);

/// Scene file names written by write_phantom_scene.
struct SceneFiles {
  static constexpr const char* kTrus = "trus.contours";
  static constexpr const char* kMriTransverse = "mri_transverse.contours";
  static constexpr const char* kMriSagittal = "mri_sagittal.contours";
  static constexpr const char* kMriCoronal = "mri_coronal.contours";
  static constexpr const char* kVolume = "mri_volume.vol";
  static constexpr const char* kTrusLandmarks = "trus_landmarks.txt";
  static constexpr const char* kMriLandmarks = "mri_landmarks.txt";
  static constexpr const char* kSeeds = "seeds.txt";
  static constexpr const char* kGroundTruth = "ground_truth.xform";
  static constexpr const char* kSpec = "phantom.spec";
  static constexpr const char* kSession = "session.txt";
};

void write_phantom_scene(const PhantomScene& scene, const std::filesystem::path& dir);

}  // namespace mrtrus
