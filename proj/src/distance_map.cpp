#include "mrtrus/distance_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "mrtrus/error.hpp"
#include "mrtrus/parallel.hpp"

namespace mrtrus {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BPoint, std::size_t>;

std::size_t nearest_index_scan(std::span<const Point3> target, const Point3& p) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d2 = (target[i] - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

DistanceSample sample_from_nearest(const Point3& nearest, const Point3& p) {
  DistanceSample s;
  const Vec3 d = p - nearest;
  s.distance = d.norm();
  if (s.distance > 0.0) s.gradient = d / s.distance;
  return s;
}

}  // namespace

double brute_force_distance(std::span<const Point3> target, const Point3& p) {
  if (target.empty()) throw Error(ErrorKind::EmptyInput, "distance to empty cloud");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : target) best = std::min(best, (q - p).squaredNorm());
  return std::sqrt(best);
}

double brute_force_distance(const PointCloud& target, const Point3& p) {
  return brute_force_distance(std::span<const Point3>(target.points()), p);
}

DistanceMap DistanceMap::build(const PointCloud& target, double cell_size, double margin, DistanceMode mode) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size))
    throw Error(ErrorKind::InvalidConfig, "distance map cell_size must be positive");
  if (!(margin >= 0.0) || !std::isfinite(margin))
    throw Error(ErrorKind::InvalidConfig, "distance map margin must be non-negative");
  if (target.empty()) throw Error(ErrorKind::EmptyInput, "distance map target cloud is empty");

  DistanceMap map;
  map.cell_size_ = cell_size;
  map.target_ = std::make_shared<const std::vector<Point3>>(target.points());
  map.target_centroid_ = target.centroid();

  Point3 lo = target.points().front();
  Point3 hi = lo;
  for (const auto& p : target.points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo.array() -= margin;
  hi.array() += margin;
  map.lower_ = lo;
  for (int a = 0; a < 3; ++a)
    map.dims_[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / cell_size)) + 1;

  std::vector<Entry> entries;
  entries.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto& p = target.points()[i];
    entries.emplace_back(BPoint(p.x(), p.y(), p.z()), i);
  }
  const bgi::rtree<Entry, bgi::rstar<16>> tree(entries.begin(), entries.end());

  if (mode == DistanceMode::Surface) {
    const auto& pts = *map.target_;
    map.normals_.assign(pts.size(), Vec3::Zero());
    map.radii_.assign(pts.size(), 0.0);
    const unsigned k = static_cast<unsigned>(std::min<std::size_t>(kNormalNeighbours, pts.size()));
    parallel_for(pts.size(), [&](std::size_t b, std::size_t e) {
      std::vector<Entry> hit;
      for (std::size_t i = b; i < e; ++i) {
        hit.clear();
        tree.query(bgi::nearest(BPoint(pts[i].x(), pts[i].y(), pts[i].z()), k), std::back_inserter(hit));
        if (hit.size() < 5) continue;
        Vec3 mean = Vec3::Zero();
        for (const auto& h : hit) mean += pts[h.second];
        mean /= static_cast<double>(hit.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        std::vector<double> dist;
        for (const auto& h : hit) {
          const Vec3 d = pts[h.second] - mean;
          cov += d * d.transpose();
          if (h.second != i) dist.push_back((pts[h.second] - pts[i]).norm());
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        const Vec3 ev = eig.eigenvalues();  // ascending
        // collinear (a lone contour) or blob-like neighbourhoods have no reliable plane
        if (!(ev[1] > 0.05 * ev[2]) || !(ev[0] < 0.2 * ev[1])) continue;
        std::sort(dist.begin(), dist.end());
        map.normals_[i] = eig.eigenvectors().col(0).normalized();
        // disks of neighbouring samples overlap, covering the gaps between them
        map.radii_[i] = dist[std::min<std::size_t>(3, dist.size() - 1)];
      }
    });
  }

  const std::size_t total = static_cast<std::size_t>(map.dims_[0]) * map.dims_[1] * map.dims_[2];
  map.nearest_.resize(total);
  const int nx = map.dims_[0];
  const int ny = map.dims_[1];
  parallel_for(static_cast<std::size_t>(map.dims_[2]), [&](std::size_t k0, std::size_t k1) {
    std::vector<Entry> hit;
    for (std::size_t k = k0; k < k1; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const Point3 node = map.node_position(i, j, static_cast<int>(k));
          hit.clear();
          tree.query(bgi::nearest(BPoint(node.x(), node.y(), node.z()), 1), std::back_inserter(hit));
          map.nearest_[map.flat(i, j, static_cast<int>(k))] = static_cast<std::uint32_t>(hit.front().second);
        }
  });
  return map;
}

DistanceSample DistanceMap::sample(std::size_t index, const Point3& p) const {
  const Point3& q = (*target_)[index];
  if (normals_.empty() || normals_[index].isZero()) return sample_from_nearest(q, p);
  const Vec3& n = normals_[index];
  const Vec3 d = p - q;
  const double s = d.dot(n);
  const Vec3 tangential = d - s * n;
  const double t = tangential.norm();
  const double excess = std::max(0.0, t - radii_[index]);
  DistanceSample out;
  out.distance = std::hypot(s, excess);
  if (out.distance > 0.0) {
    out.gradient = s * n;
    if (excess > 0.0) out.gradient += excess * tangential / t;
    out.gradient /= out.distance;
  }
  return out;
}

DistanceSample DistanceMap::node(int i, int j, int k) const { return sample(nearest_[flat(i, j, k)], node_position(i, j, k)); }

bool DistanceMap::contains(const Point3& p) const {
  const Point3 hi = upper();
  return (p.array() >= lower_.array()).all() && (p.array() <= hi.array()).all();
}

DistanceSample DistanceMap::exact(const Point3& p) const {
  return sample(nearest_index_scan(*target_, p), p);
}

DistanceSample DistanceMap::query(const Point3& p) const {
  if (!p.allFinite()) return {std::numeric_limits<double>::quiet_NaN(), Vec3::Zero()};
  if (!contains(p)) return exact(p);

  const Vec3 u = (p - lower_) / cell_size_;
  int base[3];
  for (int a = 0; a < 3; ++a)
    base[a] = std::clamp(static_cast<int>(std::floor(u[a])), 0, std::max(dims_[a] - 2, 0));
  const auto& pts = *target_;
  std::size_t best = nearest_[flat(base[0], base[1], base[2])];
  double best_d2 = (pts[best] - p).squaredNorm();
  if (!normals_.empty()) {
    // the closest splat among the corner candidates
    DistanceSample out = sample(best, p);
    for (int corner = 1; corner < 8; ++corner) {
      const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
      const std::size_t cand = nearest_[flat(std::min(base[0] + di, dims_[0] - 1),
                                             std::min(base[1] + dj, dims_[1] - 1), std::min(base[2] + dk, dims_[2] - 1))];
      if (cand == best) continue;
      const DistanceSample s = sample(cand, p);
      if (s.distance < out.distance) out = s;
    }
    return out;
  }
  for (int corner = 1; corner < 8; ++corner) {
    const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
    const std::size_t cand = nearest_[flat(std::min(base[0] + di, dims_[0] - 1), std::min(base[1] + dj, dims_[1] - 1),
                                           std::min(base[2] + dk, dims_[2] - 1))];
    const double d2 = (pts[cand] - p).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && cand < best)) {
      best_d2 = d2;
      best = cand;
    }
  }
  return sample_from_nearest(pts[best], p);
}

}  // namespace mrtrus
