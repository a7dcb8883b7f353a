#pragma once

#include <cstdint>

#include "mrtrus/distance_map.hpp"
#include "mrtrus/levenberg_marquardt.hpp"
#include "mrtrus/octree_spline.hpp"
#include "mrtrus/stats.hpp"
#include "mrtrus/types.hpp"

namespace mrtrus {

struct RegistrationConfig {
  int max_iterations = 200;
  double cost_tolerance = 1e-8;
  double param_tolerance = 1e-6;
  double lm_lambda_init = 1e-3;
  double lm_lambda_factor = 10.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
  LmOptions lm_options() const;
};

inline constexpr std::size_t kMinRegistrationPoints = 10;

/// Centroid alignment: identity rotation, translation moves the source
/// centroid onto the target centroid.
RigidTransform preregister(const PointCloud& source, const PointCloud& target);
RigidTransform preregister(const PointCloud& source, const Point3& target_centroid);

/// Sum over source points of dist(target, f(p))^2 / sigma^2.
double energy(const FusionTransform& f, const PointCloud& source, const DistanceMap& map);

/// Per-point distance of f(source) to the target, via the map.
ResidualStats residual_stats(const PointCloud& source, const DistanceMap& map, const FusionTransform& f);

struct RigidResult {
  RigidTransform transform;
  ResidualStats stats;
  LmSummary summary;
};

/// Six-parameter LM from the centroid pre-registration. Rotation steps are
/// small rotation vectors composed onto the quaternion about the current
/// centroid of the mapped source.
RigidResult register_rigid(const PointCloud& source, const DistanceMap& map, const RegistrationConfig& cfg = {});
/// Same, starting from `init` instead of the pre-registration.
RigidResult register_rigid_from(const PointCloud& source, const DistanceMap& map, const RigidTransform& init,
                                const RegistrationConfig& cfg = {});

}  // namespace mrtrus
