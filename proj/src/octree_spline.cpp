#include "mrtrus/octree_spline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "mrtrus/error.hpp"

namespace mrtrus {

namespace {

constexpr int kKeyBits = 21;
constexpr std::uint64_t kKeyMask = (std::uint64_t{1} << kKeyBits) - 1;

std::uint64_t pack(int i, int j, int k) {
  return static_cast<std::uint64_t>(i) | (static_cast<std::uint64_t>(j) << kKeyBits) |
         (static_cast<std::uint64_t>(k) << (2 * kKeyBits));
}

std::array<int, 3> unpack(std::uint64_t key) {
  return {static_cast<int>(key & kKeyMask), static_cast<int>((key >> kKeyBits) & kKeyMask),
          static_cast<int>((key >> (2 * kKeyBits)) & kKeyMask)};
}

std::array<double, 8> trilinear_weights(const std::array<double, 3>& f) {
  std::array<double, 8> w{};
  for (int c = 0; c < 8; ++c)
    w[c] = ((c & 1) ? f[0] : 1.0 - f[0]) * ((c & 2) ? f[1] : 1.0 - f[1]) * ((c & 4) ? f[2] : 1.0 - f[2]);
  return w;
}

void accumulate(std::map<int, double>& acc, const OctreeSplineFFD::Weights& w, double scale) {
  for (const auto& [index, weight] : w) acc[index] += scale * weight;
}

OctreeSplineFFD::Weights flatten(const std::map<int, double>& acc) {
  OctreeSplineFFD::Weights out;
  out.reserve(acc.size());
  for (const auto& [index, weight] : acc)
    if (weight != 0.0) out.emplace_back(index, weight);
  return out;
}

}  // namespace

OctreeSplineFFD::OctreeSplineFFD(const Point3& box_min, double box_size, int max_depth, double lambda)
    : box_min_(box_min), box_size_(box_size), max_depth_(max_depth), lambda_(lambda) {
  if (!(box_size > 0.0) || !std::isfinite(box_size) || !box_min.allFinite())
    throw Error(ErrorKind::InvalidConfig, "octree root box must be finite with positive size");
  if (max_depth < 1 || max_depth > 12)
    throw Error(ErrorKind::InvalidConfig, fmt::format("octree max_depth {} outside [1, 12]", max_depth));
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw Error(ErrorKind::InvalidConfig, "regularization weight must be non-negative");
  cells_.push_back(Cell{});
  split(0);
  rebuild({});
}

OctreeSplineFFD OctreeSplineFFD::enclosing(std::span<const Point3> pts, double padding, int max_depth,
                                           double lambda) {
  if (pts.empty()) throw Error(ErrorKind::EmptyInput, "octree over an empty cloud");
  Point3 lo = pts.front();
  Point3 hi = lo;
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double side = (hi - lo).maxCoeff() + 2.0 * padding;
  const Point3 centre = 0.5 * (lo + hi);
  return OctreeSplineFFD(centre - Vec3::Constant(0.5 * side), side, max_depth, lambda);
}

void OctreeSplineFFD::set_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw Error(ErrorKind::InvalidConfig, "regularization weight must be non-negative");
  lambda_ = lambda;
}

std::uint64_t OctreeSplineFFD::corner_key(const Cell& c, int corner) const {
  const int s = lattice_size(c.depth);
  return pack(c.origin[0] + ((corner & 1) ? s : 0), c.origin[1] + ((corner & 2) ? s : 0),
              c.origin[2] + ((corner & 4) ? s : 0));
}

Point3 OctreeSplineFFD::key_position(std::uint64_t key) const {
  const auto ijk = unpack(key);
  const double unit = box_size_ / static_cast<double>(lattice_size(0));
  return box_min_ + unit * Vec3(ijk[0], ijk[1], ijk[2]);
}

void OctreeSplineFFD::split(int cell) {
  const Cell parent = cells_[cell];
  const int half = lattice_size(parent.depth + 1);
  const int first = static_cast<int>(cells_.size());
  for (int c = 0; c < 8; ++c) {
    Cell child;
    child.depth = parent.depth + 1;
    child.origin = {parent.origin[0] + ((c & 1) ? half : 0), parent.origin[1] + ((c & 2) ? half : 0),
                    parent.origin[2] + ((c & 4) ? half : 0)};
    cells_.push_back(child);
  }
  cells_[cell].first_child = first;
}

int OctreeSplineFFD::locate(const Point3& p, std::array<double, 3>& frac) const {
  const double n = static_cast<double>(lattice_size(0));
  std::array<double, 3> u{};
  for (int a = 0; a < 3; ++a) {
    const double v = (p[a] - box_min_[a]) / box_size_ * n;
    u[a] = std::isfinite(v) ? std::clamp(v, 0.0, n) : 0.0;
  }
  int c = 0;
  while (cells_[c].first_child >= 0) {
    const Cell& cell = cells_[c];
    const int half = lattice_size(cell.depth + 1);
    int child = 0;
    for (int a = 0; a < 3; ++a)
      if (u[a] >= cell.origin[a] + half) child |= (1 << a);
    c = cell.first_child + child;
  }
  const Cell& leaf = cells_[c];
  const double s = lattice_size(leaf.depth);
  for (int a = 0; a < 3; ++a) frac[a] = std::clamp((u[a] - leaf.origin[a]) / s, 0.0, 1.0);
  return c;
}

int OctreeSplineFFD::deepest_leaf() const {
  int d = 0;
  for (int l : leaves_) d = std::max(d, cells_[l].depth);
  return d;
}

int OctreeSplineFFD::leaf_depth_at(const Point3& p) const {
  std::array<double, 3> frac{};
  return cells_[locate(p, frac)].depth;
}

int OctreeSplineFFD::leaf_at(const Point3& p) const {
  std::array<double, 3> frac{};
  return locate(p, frac);
}

std::map<std::uint64_t, Vec3> OctreeSplineFFD::node_values() const {
  std::map<std::uint64_t, Vec3> values;
  for (std::size_t i = 0; i < nodes_.size(); ++i) values[nodes_[i].key] = effective_[i];
  return values;
}

void OctreeSplineFFD::rebuild(const std::map<std::uint64_t, Vec3>& values) {
  leaves_.clear();
  for (int c = 0; c < static_cast<int>(cells_.size()); ++c)
    if (cells_[c].first_child < 0) leaves_.push_back(c);

  std::map<std::uint64_t, int> ids;
  for (int l : leaves_)
    for (int corner = 0; corner < 8; ++corner) ids.emplace(corner_key(cells_[l], corner), 0);
  nodes_.assign(ids.size(), Node{});
  {
    int next = 0;
    for (auto& [key, id] : ids) {
      id = next;
      nodes_[next].key = key;
      ++next;
    }
  }
  for (int l : leaves_)
    for (int corner = 0; corner < 8; ++corner) cells_[l].corner_nodes[corner] = ids.at(corner_key(cells_[l], corner));

  // A node lying on a leaf's closed box without being one of its corners is
  // constrained by the coarsest such leaf.
  std::vector<int> constraint(nodes_.size(), -1);
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    const auto ijk = unpack(nodes_[n].key);
    int best = -1;
    for (int l : leaves_) {
      const Cell& cell = cells_[l];
      const int s = lattice_size(cell.depth);
      bool inside = true;
      bool corner = true;
      for (int a = 0; a < 3; ++a) {
        const int rel = ijk[a] - cell.origin[a];
        if (rel < 0 || rel > s) inside = false;
        if (rel != 0 && rel != s) corner = false;
      }
      if (!inside || corner) continue;
      if (best < 0 || cell.depth < cells_[best].depth) best = l;
    }
    constraint[n] = best;
  }

  int free_count = 0;
  for (std::size_t n = 0; n < nodes_.size(); ++n)
    if (constraint[n] < 0) nodes_[n].free_index = free_count++;

  std::vector<char> resolved(nodes_.size(), 0);
  std::function<const Weights&(int)> expand = [&](int n) -> const Weights& {
    if (resolved[n]) return nodes_[n].expansion;
    if (nodes_[n].free_index >= 0) {
      nodes_[n].expansion = {{nodes_[n].free_index, 1.0}};
    } else {
      const Cell& cell = cells_[constraint[n]];
      const auto ijk = unpack(nodes_[n].key);
      const double s = lattice_size(cell.depth);
      std::array<double, 3> f{};
      for (int a = 0; a < 3; ++a) f[a] = (ijk[a] - cell.origin[a]) / s;
      const auto w = trilinear_weights(f);
      std::map<int, double> acc;
      for (int corner = 0; corner < 8; ++corner)
        if (w[corner] != 0.0) accumulate(acc, expand(cell.corner_nodes[corner]), w[corner]);
      nodes_[n].expansion = flatten(acc);
    }
    resolved[n] = 1;
    return nodes_[n].expansion;
  };
  for (std::size_t n = 0; n < nodes_.size(); ++n) expand(static_cast<int>(n));

  free_values_.assign(free_count, Vec3::Zero());
  for (const auto& node : nodes_)
    if (node.free_index >= 0) {
      auto it = values.find(node.key);
      if (it != values.end()) free_values_[node.free_index] = it->second;
    }

  std::set<std::pair<int, int>> edges;
  for (int l : leaves_)
    for (int corner = 0; corner < 8; ++corner)
      for (int bit = 1; bit < 8; bit <<= 1)
        if (!(corner & bit)) {
          const int a = cells_[l].corner_nodes[corner];
          const int b = cells_[l].corner_nodes[corner | bit];
          edges.emplace(std::min(a, b), std::max(a, b));
        }
  edge_diffs_.clear();
  edge_diffs_.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    std::map<int, double> acc;
    accumulate(acc, nodes_[a].expansion, 1.0);
    accumulate(acc, nodes_[b].expansion, -1.0);
    auto diff = flatten(acc);
    if (!diff.empty()) edge_diffs_.push_back(std::move(diff));
  }
  refresh_effective();
}

void OctreeSplineFFD::refresh_effective() {
  effective_.assign(nodes_.size(), Vec3::Zero());
  for (std::size_t n = 0; n < nodes_.size(); ++n)
    for (const auto& [index, weight] : nodes_[n].expansion) effective_[n] += weight * free_values_[index];
}

void OctreeSplineFFD::set_free_values(std::vector<Vec3> values) {
  if (values.size() != free_values_.size())
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("expected {} control values, got {}", free_values_.size(), values.size()));
  for (const auto& v : values)
    if (!v.allFinite()) throw Error(ErrorKind::NonFinite, "non-finite control displacement");
  free_values_ = std::move(values);
  refresh_effective();
}

Vec3 OctreeSplineFFD::displacement(const Point3& p) const {
  std::array<double, 3> frac{};
  const Cell& leaf = cells_[locate(p, frac)];
  const auto w = trilinear_weights(frac);
  Vec3 d = Vec3::Zero();
  for (int corner = 0; corner < 8; ++corner) d += w[corner] * effective_[leaf.corner_nodes[corner]];
  return d;
}

void OctreeSplineFFD::displacement_weights(const Point3& p, Weights& out) const {
  std::array<double, 3> frac{};
  const Cell& leaf = cells_[locate(p, frac)];
  const auto w = trilinear_weights(frac);
  std::map<int, double> acc;
  for (int corner = 0; corner < 8; ++corner)
    if (w[corner] != 0.0) accumulate(acc, nodes_[leaf.corner_nodes[corner]].expansion, w[corner]);
  out = flatten(acc);
}

double OctreeSplineFFD::regularization_energy() const {
  double e = 0.0;
  for (const auto& diff : edge_diffs_) {
    Vec3 d = Vec3::Zero();
    for (const auto& [index, weight] : diff) d += weight * free_values_[index];
    e += d.squaredNorm();
  }
  return lambda_ * e;
}

double OctreeSplineFFD::max_displacement_norm() const {
  double m = 0.0;
  for (const auto& v : effective_) m = std::max(m, v.norm());
  return m;
}

OctreeSplineFFD OctreeSplineFFD::refined(std::span<const Point3> positions, std::span<const double> residuals,
                                         double threshold) const {
  if (positions.size() != residuals.size())
    throw Error(ErrorKind::DimensionMismatch, "positions and residuals differ in length");
  std::set<int> marked;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!(residuals[i] > threshold)) continue;
    std::array<double, 3> frac{};
    const int leaf = locate(positions[i], frac);
    if (cells_[leaf].depth < max_depth_) marked.insert(leaf);
  }
  if (marked.empty()) return *this;

  OctreeSplineFFD out = *this;
  auto values = node_values();
  for (int leaf : marked) {
    const Cell parent = out.cells_[leaf];
    std::array<Vec3, 8> corner_values;
    for (int c = 0; c < 8; ++c) corner_values[c] = effective_[parent.corner_nodes[c]];
    out.split(leaf);
    const double s = lattice_size(parent.depth);
    const int first = out.cells_[leaf].first_child;
    for (int child = 0; child < 8; ++child)
      for (int corner = 0; corner < 8; ++corner) {
        const auto key = out.corner_key(out.cells_[first + child], corner);
        if (values.count(key)) continue;
        const auto ijk = unpack(key);
        std::array<double, 3> f{};
        for (int a = 0; a < 3; ++a) f[a] = (ijk[a] - parent.origin[a]) / s;
        const auto w = trilinear_weights(f);
        Vec3 v = Vec3::Zero();
        for (int c = 0; c < 8; ++c) v += w[c] * corner_values[c];
        values.emplace(key, v);
      }
  }
  out.rebuild(values);
  return out;
}

std::vector<OctreeSplineFFD::CellRecord> OctreeSplineFFD::depth_first_records() const {
  std::vector<CellRecord> out;
  std::function<void(int)> visit = [&](int c) {
    const Cell& cell = cells_[c];
    CellRecord rec;
    rec.leaf = cell.first_child < 0;
    if (rec.leaf) {
      for (int corner = 0; corner < 8; ++corner) rec.corners[corner] = effective_[cell.corner_nodes[corner]];
      out.push_back(rec);
      return;
    }
    out.push_back(rec);
    for (int child = 0; child < 8; ++child) visit(cell.first_child + child);
  };
  visit(0);
  return out;
}

OctreeSplineFFD OctreeSplineFFD::from_records(const Point3& box_min, double box_size, int max_depth,
                                              double lambda, std::span<const CellRecord> depth_first) {
  OctreeSplineFFD out(box_min, box_size, max_depth, lambda);
  out.cells_.assign(1, Cell{});
  std::map<std::uint64_t, Vec3> values;
  std::size_t pos = 0;
  std::function<void(int)> build = [&](int c) {
    if (pos >= depth_first.size()) throw Error(ErrorKind::ParseError, "octree records end early");
    const CellRecord& rec = depth_first[pos++];
    if (rec.leaf) {
      for (int corner = 0; corner < 8; ++corner) values[out.corner_key(out.cells_[c], corner)] = rec.corners[corner];
      return;
    }
    if (out.cells_[c].depth >= max_depth)
      throw Error(ErrorKind::ParseError, "octree split record below max_depth");
    out.split(c);
    const int first = out.cells_[c].first_child;
    for (int child = 0; child < 8; ++child) build(first + child);
  };
  build(0);
  if (pos != depth_first.size()) throw Error(ErrorKind::ParseError, "trailing octree records");
  out.rebuild(values);
  return out;
}

OctreeSplineFFD refine_octree(const OctreeSplineFFD& ffd, std::span<const Point3> positions,
                              std::span<const double> residuals, double threshold) {
  return ffd.refined(positions, residuals, threshold);
}

Point3 FusionTransform::apply(const Point3& p) const {
  const Point3 q = rigid.apply(p);
  if (!ffd) return q;
  return q + ffd->displacement(q);
}

Point3 FusionTransform::inverse_apply(const Point3& target, int max_iterations, double tolerance) const {
  const RigidTransform inv = rigid.inverse();
  if (!ffd) return inv.apply(target);
  Point3 q = target;
  for (int it = 0; it < max_iterations; ++it) {
    const Vec3 err = q + ffd->displacement(q) - target;
    if (err.norm() <= tolerance) break;
    q -= err;
  }
  return inv.apply(q);
}

}  // namespace mrtrus
