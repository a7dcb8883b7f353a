#pragma once

#include "mrtrus/distance_map.hpp"
#include "mrtrus/octree_spline.hpp"
#include "mrtrus/rigid_registration.hpp"

namespace mrtrus {

struct ElasticOptions {
  double lambda = OctreeSplineFFD::kDefaultLambda;
  int max_depth = OctreeSplineFFD::kDefaultMaxDepth;
  double refine_threshold = 1.5;  // mm
  double padding = OctreeSplineFFD::kDefaultPadding;
};

struct ElasticLevel {
  int deepest_leaf = 0;
  std::size_t leaves = 0;
  std::size_t free_nodes = 0;
  LmSummary summary;
};

struct ElasticResult {
  FusionTransform transform;
  ResidualStats stats;
  double data_energy = 0.0;
  double regularization_energy = 0.0;
  std::vector<ElasticLevel> levels;
};

/// Coarse-to-fine octree-spline registration on top of a fixed rigid map:
/// optimise the control displacements, split leaves that still hold points
/// with residual above the threshold, re-optimise, until max_depth. The
/// objective is the weighted data energy plus lambda times the membrane
/// energy of adjacent corner differences.
ElasticResult register_elastic(const PointCloud& source, const DistanceMap& map, const RigidTransform& init,
                               const RegistrationConfig& cfg = {}, const ElasticOptions& opt = {});

}  // namespace mrtrus
