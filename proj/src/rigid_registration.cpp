#include "mrtrus/rigid_registration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/parallel.hpp"

namespace mrtrus {

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "statistics of an empty series");
  SummaryStats s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);
  return s;
}

ResidualStats residual_summary(std::vector<double> per_point) {
  ResidualStats r;
  static_cast<SummaryStats&>(r) = summarize(per_point);
  r.per_point = std::move(per_point);
  return r;
}

void RegistrationConfig::validate() const {
  if (max_iterations <= 0) throw Error(ErrorKind::InvalidConfig, "max_iterations must be positive");
  if (!(cost_tolerance > 0.0)) throw Error(ErrorKind::InvalidConfig, "cost_tolerance must be positive");
  if (!(param_tolerance > 0.0)) throw Error(ErrorKind::InvalidConfig, "param_tolerance must be positive");
  if (!(lm_lambda_init > 0.0)) throw Error(ErrorKind::InvalidConfig, "lm_lambda_init must be positive");
  if (!(lm_lambda_factor > 1.0)) throw Error(ErrorKind::InvalidConfig, "lm_lambda_factor must exceed 1");
}

LmOptions RegistrationConfig::lm_options() const {
  return {max_iterations, cost_tolerance, param_tolerance, lm_lambda_init, lm_lambda_factor};
}

RigidTransform preregister(const PointCloud& source, const Point3& target_centroid) {
  if (source.empty()) throw Error(ErrorKind::EmptyInput, "pre-registration with an empty source");
  return {Eigen::Quaterniond::Identity(), target_centroid - source.centroid()};
}

RigidTransform preregister(const PointCloud& source, const PointCloud& target) {
  if (target.empty()) throw Error(ErrorKind::EmptyInput, "pre-registration with an empty target");
  return preregister(source, target.centroid());
}

double energy(const FusionTransform& f, const PointCloud& source, const DistanceMap& map) {
  double e = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double d = map.query(f.apply(source.points()[i])).distance;
    const double s = source.sigmas()[i];
    e += d * d / (s * s);
  }
  return e;
}

ResidualStats residual_stats(const PointCloud& source, const DistanceMap& map, const FusionTransform& f) {
  if (source.empty()) throw Error(ErrorKind::EmptyInput, "residual statistics of an empty cloud");
  std::vector<double> d(source.size());
  parallel_for(source.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) d[i] = map.query(f.apply(source.points()[i])).distance;
  });
  return residual_summary(std::move(d));
}

namespace {

class RigidProblem {
 public:
  RigidProblem(const PointCloud& source, const DistanceMap& map) : source_(source), map_(map) {}

  Point3 mapped_centroid(const RigidTransform& t) const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : source_.points()) c += t.apply(p);
    return c / static_cast<double>(source_.size());
  }

  void evaluate(const RigidTransform& t, Eigen::VectorXd& r, Eigen::SparseMatrix<double>* J) const {
    const std::size_t m = source_.size();
    r.resize(static_cast<Eigen::Index>(m));
    std::vector<DistanceSample> samples(m);
    std::vector<Point3> mapped(m);
    parallel_for(m, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        mapped[i] = t.apply(source_.points()[i]);
        samples[i] = map_.query(mapped[i]);
      }
    });
    for (std::size_t i = 0; i < m; ++i) r[static_cast<Eigen::Index>(i)] = samples[i].distance / source_.sigmas()[i];
    if (!J) return;
    const Point3 c = mapped_centroid(t);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(6 * m);
    for (std::size_t i = 0; i < m; ++i) {
      const double inv_sigma = 1.0 / source_.sigmas()[i];
      const Vec3& g = samples[i].gradient;
      const Vec3 rot = (mapped[i] - c).cross(g);
      const auto row = static_cast<int>(i);
      for (int a = 0; a < 3; ++a) {
        trip.emplace_back(row, a, inv_sigma * rot[a]);
        trip.emplace_back(row, 3 + a, inv_sigma * g[a]);
      }
    }
    J->resize(static_cast<Eigen::Index>(m), 6);
    J->setFromTriplets(trip.begin(), trip.end());
  }

  RigidTransform retract(const RigidTransform& t, const Eigen::VectorXd& delta) const {
    const Vec3 omega = delta.head<3>();
    const Vec3 tau = delta.tail<3>();
    const double angle = omega.norm();
    const Eigen::Quaterniond dq =
        angle > 0.0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega / angle)) : Eigen::Quaterniond::Identity();
    const Point3 c = mapped_centroid(t);
    // q' = dq (q - c) + c + tau
    return {dq * t.rotation(), dq * (t.translation() - c) + c + tau};
  }

 private:
  const PointCloud& source_;
  const DistanceMap& map_;
};

}  // namespace

RigidResult register_rigid_from(const PointCloud& source, const DistanceMap& map, const RigidTransform& init,
                                const RegistrationConfig& cfg) {
  cfg.validate();
  if (source.size() < kMinRegistrationPoints)
    throw Error(ErrorKind::InsufficientData,
                fmt::format("registration needs at least {} points, got {}", kMinRegistrationPoints, source.size()));
  RigidProblem problem(source, map);
  RigidTransform state = init;
  RigidResult out;
  out.summary = levenberg_marquardt(problem, state, cfg.lm_options());
  out.transform = state;
  out.stats = residual_stats(source, map, FusionTransform{state, std::nullopt});
  return out;
}

RigidResult register_rigid(const PointCloud& source, const DistanceMap& map, const RegistrationConfig& cfg) {
  if (source.size() < kMinRegistrationPoints)
    throw Error(ErrorKind::InsufficientData,
                fmt::format("registration needs at least {} points, got {}", kMinRegistrationPoints, source.size()));
  return register_rigid_from(source, map, preregister(source, map.target_centroid()), cfg);
}

}  // namespace mrtrus
