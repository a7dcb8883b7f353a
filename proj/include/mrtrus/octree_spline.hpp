#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mrtrus/types.hpp"

namespace mrtrus {

/// Adaptive octree free-form deformation with trilinear (C0) cells.
///
/// Control displacements live on the corners of the leaf cells, keyed on an
/// integer lattice at the finest resolution, so adjacent leaves share
/// corners. Where a small leaf meets a larger one, the small leaf's extra
/// corners are "hanging": their value is the larger leaf's trilinear
/// interpolation, which keeps the field continuous across every face. Only
/// non-hanging corners are free parameters.
///
/// Depth 0 is the root cube; a fresh deformation starts split once (eight
/// depth-1 leaves) and refinement never goes past `max_depth`.
class OctreeSplineFFD {
 public:
  static constexpr int kDefaultMaxDepth = 3;
  static constexpr double kDefaultLambda = 0.1;
  static constexpr double kDefaultPadding = 5.0;

  /// (free parameter index, weight)
  using Weights = std::vector<std::pair<int, double>>;

  struct CellRecord {
    bool leaf = true;
    std::array<Vec3, 8> corners{};  // leaves only; corner bit order x=1, y=2, z=4
  };

  OctreeSplineFFD(const Point3& box_min, double box_size, int max_depth = kDefaultMaxDepth,
                  double lambda = kDefaultLambda);

  /// Cube centred on the bounding box of `pts`, padded on every side.
  static OctreeSplineFFD enclosing(std::span<const Point3> pts, double padding = kDefaultPadding,
                                   int max_depth = kDefaultMaxDepth, double lambda = kDefaultLambda);

  static OctreeSplineFFD from_records(const Point3& box_min, double box_size, int max_depth, double lambda,
                                      std::span<const CellRecord> depth_first);
  std::vector<CellRecord> depth_first_records() const;

  const Point3& box_min() const noexcept { return box_min_; }
  double box_size() const noexcept { return box_size_; }
  Point3 box_max() const { return box_min_ + Vec3::Constant(box_size_); }
  int max_depth() const noexcept { return max_depth_; }
  double lambda() const noexcept { return lambda_; }
  void set_lambda(double lambda);

  std::size_t leaf_count() const noexcept { return leaves_.size(); }
  int deepest_leaf() const;
  bool can_refine() const { return deepest_leaf() < max_depth_ || leaves_.empty(); }
  /// Depth of the leaf that owns p (after clamping to the root cube).
  int leaf_depth_at(const Point3& p) const;
  /// Cell index of the leaf that owns p; stable across copies.
  int leaf_at(const Point3& p) const;

  /// Displacement at p; outside the root cube the clamped boundary point is used.
  Vec3 displacement(const Point3& p) const;
  /// displacement(p) == sum of weight * free_values()[index].
  void displacement_weights(const Point3& p, Weights& out) const;

  std::size_t free_node_count() const noexcept { return free_values_.size(); }
  const std::vector<Vec3>& free_values() const noexcept { return free_values_; }
  void set_free_values(std::vector<Vec3> values);

  /// One entry per distinct leaf edge: coefficients of (corner_a - corner_b)
  /// over the free parameters. The membrane energy is
  /// lambda * sum over edges of |sum coeff * value|^2.
  const std::vector<Weights>& edge_differences() const noexcept { return edge_diffs_; }
  double regularization_energy() const;
  double max_displacement_norm() const;

  /// Splits every leaf (depth < max_depth) that contains at least one of
  /// `positions` whose residual exceeds `threshold`. New corners take the
  /// parent's interpolated value, so the field is unchanged.
  OctreeSplineFFD refined(std::span<const Point3> positions, std::span<const double> residuals,
                          double threshold) const;

 private:
  struct Cell {
    int depth = 0;
    std::array<int, 3> origin{};  // lattice coordinates
    int first_child = -1;
    std::array<int, 8> corner_nodes{};  // node ids, leaves only
  };
  struct Node {
    std::uint64_t key = 0;
    int free_index = -1;
    Weights expansion;
  };

  int lattice_size(int depth) const { return 1 << (max_depth_ - depth); }
  std::uint64_t corner_key(const Cell& c, int corner) const;
  Point3 key_position(std::uint64_t key) const;
  int locate(const Point3& p, std::array<double, 3>& frac) const;
  void split(int cell);
  std::map<std::uint64_t, Vec3> node_values() const;
  void rebuild(const std::map<std::uint64_t, Vec3>& values);
  void refresh_effective();

  Point3 box_min_;
  double box_size_;
  int max_depth_;
  double lambda_;
  std::vector<Cell> cells_;
  std::vector<int> leaves_;
  std::vector<Node> nodes_;
  std::vector<Vec3> free_values_;
  std::vector<Vec3> effective_;
  std::vector<Weights> edge_diffs_;
};

/// Maps TRUS-frame points into the MRI frame: rigid part first, then the
/// optional FFD displacement evaluated at the rigidly mapped point.
struct FusionTransform {
  RigidTransform rigid;
  std::optional<OctreeSplineFFD> ffd;

  Point3 apply(const Point3& p) const;
  /// Numeric inverse: fixed-point iteration on q + D(q) = target starting
  /// from the rigid inverse, then the exact rigid inverse.
  Point3 inverse_apply(const Point3& target, int max_iterations = 20, double tolerance = 0.01) const;
};

inline Point3 apply_transform(const FusionTransform& f, const Point3& p) { return f.apply(p); }

OctreeSplineFFD refine_octree(const OctreeSplineFFD& ffd, std::span<const Point3> positions,
                              std::span<const double> residuals, double threshold);

}  // namespace mrtrus
