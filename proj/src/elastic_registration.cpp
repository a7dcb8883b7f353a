#include "mrtrus/elastic_registration.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/parallel.hpp"

namespace mrtrus {

namespace {

/// Unknowns are the stacked free control displacements (x, y, z per node).
class ElasticProblem {
 public:
  ElasticProblem(const PointCloud& source, const DistanceMap& map, const RigidTransform& rigid,
                 const OctreeSplineFFD& structure)
      : source_(source), map_(map), structure_(structure) {
    rigid_points_.reserve(source.size());
    for (const auto& p : source.points()) rigid_points_.push_back(rigid.apply(p));
    weights_.resize(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) structure.displacement_weights(rigid_points_[i], weights_[i]);
  }

  Eigen::VectorXd pack(const OctreeSplineFFD& ffd) const {
    Eigen::VectorXd x(3 * static_cast<Eigen::Index>(ffd.free_node_count()));
    for (std::size_t n = 0; n < ffd.free_node_count(); ++n) x.segment<3>(3 * static_cast<Eigen::Index>(n)) = ffd.free_values()[n];
    return x;
  }

  std::vector<Vec3> unpack(const Eigen::VectorXd& x) const {
    std::vector<Vec3> v(static_cast<std::size_t>(x.size() / 3));
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = x.segment<3>(3 * static_cast<Eigen::Index>(n));
    return v;
  }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::SparseMatrix<double>* J) const {
    const std::size_t m = source_.size();
    const auto& edges = structure_.edge_differences();
    const double sqrt_lambda = std::sqrt(structure_.lambda());
    const Eigen::Index rows = static_cast<Eigen::Index>(m + 3 * edges.size());
    r.resize(rows);

    std::vector<DistanceSample> samples(m);
    parallel_for(m, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        Vec3 d = Vec3::Zero();
        for (const auto& [index, w] : weights_[i]) d += w * x.segment<3>(3 * index);
        samples[i] = map_.query(rigid_points_[i] + d);
      }
    });
    for (std::size_t i = 0; i < m; ++i) r[static_cast<Eigen::Index>(i)] = samples[i].distance / source_.sigmas()[i];
    for (std::size_t e = 0; e < edges.size(); ++e) {
      Vec3 d = Vec3::Zero();
      for (const auto& [index, w] : edges[e]) d += w * x.segment<3>(3 * index);
      r.segment<3>(static_cast<Eigen::Index>(m + 3 * e)) = sqrt_lambda * d;
    }
    if (!J) return;

    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < m; ++i) {
      const double inv_sigma = 1.0 / source_.sigmas()[i];
      for (const auto& [index, w] : weights_[i])
        for (int a = 0; a < 3; ++a)
          trip.emplace_back(static_cast<int>(i), 3 * index + a, inv_sigma * w * samples[i].gradient[a]);
    }
    for (std::size_t e = 0; e < edges.size(); ++e)
      for (const auto& [index, w] : edges[e])
        for (int a = 0; a < 3; ++a)
          trip.emplace_back(static_cast<int>(m + 3 * e + a), 3 * index + a, sqrt_lambda * w);
    J->resize(rows, x.size());
    J->setFromTriplets(trip.begin(), trip.end());
  }

  Eigen::VectorXd retract(const Eigen::VectorXd& x, const Eigen::VectorXd& delta) const { return x + delta; }

 private:
  const PointCloud& source_;
  const DistanceMap& map_;
  const OctreeSplineFFD& structure_;
  std::vector<Point3> rigid_points_;
  std::vector<OctreeSplineFFD::Weights> weights_;
};

ElasticLevel optimise_level(const PointCloud& source, const DistanceMap& map, const RigidTransform& rigid,
                            OctreeSplineFFD& ffd, const RegistrationConfig& cfg) {
  ElasticProblem problem(source, map, rigid, ffd);
  Eigen::VectorXd x = problem.pack(ffd);
  ElasticLevel level;
  level.summary = levenberg_marquardt(problem, x, cfg.lm_options());
  ffd.set_free_values(problem.unpack(x));
  level.deepest_leaf = ffd.deepest_leaf();
  level.leaves = ffd.leaf_count();
  level.free_nodes = ffd.free_node_count();
  return level;
}

}  // namespace

ElasticResult register_elastic(const PointCloud& source, const DistanceMap& map, const RigidTransform& init,
                               const RegistrationConfig& cfg, const ElasticOptions& opt) {
  cfg.validate();
  if (source.size() < kMinRegistrationPoints)
    throw Error(ErrorKind::InsufficientData,
                fmt::format("registration needs at least {} points, got {}", kMinRegistrationPoints, source.size()));
  if (!(opt.refine_threshold > 0.0)) throw Error(ErrorKind::InvalidConfig, "refine_threshold must be positive");

  OctreeSplineFFD ffd = OctreeSplineFFD::enclosing(map.target(), opt.padding, opt.max_depth, opt.lambda);
  ElasticResult out;
  std::vector<Point3> rigid_points;
  rigid_points.reserve(source.size());
  for (const auto& p : source.points()) rigid_points.push_back(init.apply(p));

  out.levels.push_back(optimise_level(source, map, init, ffd, cfg));
  for (int round = 1; round < ffd.max_depth(); ++round) {
    const FusionTransform current{init, ffd};
    const auto stats = residual_stats(source, map, current);
    OctreeSplineFFD next = ffd.refined(rigid_points, stats.per_point, opt.refine_threshold);
    if (next.leaf_count() == ffd.leaf_count()) break;
    ffd = std::move(next);
    out.levels.push_back(optimise_level(source, map, init, ffd, cfg));
  }

  out.transform = FusionTransform{init, ffd};
  out.stats = residual_stats(source, map, out.transform);
  out.data_energy = energy(out.transform, source, map);
  out.regularization_energy = ffd.regularization_energy();
  return out;
}

}  // namespace mrtrus
