#include "mrtrus/volumetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/geometry.hpp"
#include "mrtrus/metrics.hpp"
#include "mrtrus/parallel.hpp"

namespace mrtrus {

double stack_volume(const ContourStack& stack, VolumeFormula formula) {
  if (stack.size() < 2)
    throw Error(ErrorKind::InsufficientData, fmt::format("volume needs 2 slices, got {}", stack.size()));
  const double d = stack.spacing() / 10.0;  // cm
  double v = 0.0;
  double prev = slice_area(stack.contours().front());
  for (std::size_t i = 1; i < stack.size(); ++i) {
    const double cur = slice_area(stack.contours()[i]);
    if (formula == VolumeFormula::Frustum)
      v += (prev + cur + std::sqrt(prev * cur)) / 3.0 * d;
    else
      v += 0.5 * (prev + cur) * d;
    prev = cur;
  }
  return v;
}

double percent_change(double v0, double v1) {
  if (!(v0 > 0.0)) throw Error(ErrorKind::InvalidInput, fmt::format("reference volume {} must be positive", v0));
  return 100.0 * (v1 - v0) / v0;
}

void SeedImplant::validate() const {
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (!(seeds[i].strength > 0.0) || !seeds[i].position.allFinite())
      throw Error(ErrorKind::InvalidInput, fmt::format("seed {}: strength must be positive and finite", i));
}

void DoseKernelConfig::validate() const {
  if (!(mu_per_cm >= 0.0)) throw Error(ErrorKind::InvalidConfig, "mu must be >= 0");
  if (!(r_min_cm > 0.0)) throw Error(ErrorKind::InvalidConfig, "r_min must be positive");
}

double dose_at(const SeedImplant& implant, const Point3& p, const DoseKernelConfig& kernel) {
  double dose = 0.0;
  for (const auto& s : implant.seeds) {
    const double r = std::max((p - s.position).norm() / 10.0, kernel.r_min_cm);
    dose += s.strength * std::exp(-kernel.mu_per_cm * r) / (r * r);
  }
  return dose;
}

void DVHCurve::validate() const {
  if (dose_bins.empty() || dose_bins.size() != cumulative_fraction.size())
    throw Error(ErrorKind::InvalidInput, "DVH needs matching, non-empty bins and fractions");
  for (std::size_t i = 0; i < dose_bins.size(); ++i) {
    const double f = cumulative_fraction[i];
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::InvalidInput, "DVH fraction outside [0, 1]");
    if (i > 0 && !(dose_bins[i] > dose_bins[i - 1])) throw Error(ErrorKind::InvalidInput, "DVH bins must ascend");
    if (i > 0 && f > cumulative_fraction[i - 1]) throw Error(ErrorKind::InvalidInput, "DVH fraction increases");
  }
}

std::vector<double> parse_bins(std::string_view spec) {
  double v[3] = {0, 0, 0};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? spec.find(':', pos) : spec.size();
    if (end == std::string_view::npos)
      throw Error(ErrorKind::InvalidInput, fmt::format("bins '{}' must be start:stop:step", spec));
    const auto part = spec.substr(pos, end - pos);
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v[i]);
    if (ec != std::errc{} || ptr != part.data() + part.size() || !std::isfinite(v[i]))
      throw Error(ErrorKind::InvalidInput, fmt::format("bins '{}': '{}' is not a number", spec, part));
    pos = end + 1;
  }
  const auto [start, stop, step] = v;
  if (start < 0.0 || !(step > 0.0) || stop < start)
    throw Error(ErrorKind::InvalidInput, fmt::format("bins '{}' need 0 <= start <= stop and step > 0", spec));
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (n > 1'000'000) throw Error(ErrorKind::InvalidInput, "too many DVH bins");
  std::vector<double> bins(n);
  for (std::size_t i = 0; i < n; ++i) bins[i] = start + static_cast<double>(i) * step;
  return bins;
}

DVHCurve dvh_from_doses(std::span<const double> doses, std::span<const double> bins) {
  if (doses.empty()) throw Error(ErrorKind::EmptyInput, "no dose samples");
  if (bins.empty()) throw Error(ErrorKind::InvalidInput, "no DVH bins");
  std::vector<double> sorted(doses.begin(), doses.end());
  std::sort(sorted.begin(), sorted.end());
  DVHCurve curve;
  curve.dose_bins.assign(bins.begin(), bins.end());
  const double n = static_cast<double>(sorted.size());
  for (double b : bins) {
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), b);
    curve.cumulative_fraction.push_back(static_cast<double>(sorted.end() - first) / n);
  }
  curve.validate();
  return curve;
}

std::vector<Point3> rasterize_stack(const ContourStack& target, double pitch) {
  if (!(pitch > 0.0)) throw Error(ErrorKind::InvalidInput, "sampling pitch must be positive");
  if (target.size() < 2)
    throw Error(ErrorKind::InsufficientData, fmt::format("DVH target needs 2 slices, got {}", target.size()));
  const auto& contours = target.contours();
  Point2 lo = contours.front().points.front(), hi = lo;
  for (const auto& c : contours)
    for (const auto& p : c.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  const double z0 = contours.front().z, z1 = contours.back().z;
  // lattice anchored at the origin so dilated targets share sample positions
  auto first_index = [&](double v) { return static_cast<long>(std::ceil(v / pitch - 1e-9)); };
  auto last_index = [&](double v) { return static_cast<long>(std::floor(v / pitch + 1e-9)); };
  const long i0 = first_index(lo.x()), i1 = last_index(hi.x());
  const long j0 = first_index(lo.y()), j1 = last_index(hi.y());
  const long k0 = first_index(z0), k1 = last_index(z1);
  if (k1 < k0) return {};
  std::vector<std::vector<Point3>> planes(static_cast<std::size_t>(k1 - k0 + 1));
  parallel_for(planes.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const double z = static_cast<double>(k0 + static_cast<long>(idx)) * pitch;
      const PlanarContour* nearest = &contours.front();
      for (const auto& c : contours)
        if (std::abs(c.z - z) < std::abs(nearest->z - z)) nearest = &c;
      for (long j = j0; j <= j1; ++j)
        for (long i = i0; i <= i1; ++i) {
          const Point2 q(static_cast<double>(i) * pitch, static_cast<double>(j) * pitch);
          if (point_in_polygon(nearest->points, q)) planes[idx].emplace_back(q.x(), q.y(), z);
        }
    }
  });
  std::vector<Point3> out;
  for (auto& p : planes) out.insert(out.end(), p.begin(), p.end());
  return out;
}

DVHCurve compute_dvh(const SeedImplant& implant, const ContourStack& target, const DoseKernelConfig& kernel,
                     std::span<const double> bins, double pitch) {
  implant.validate();
  kernel.validate();
  const auto samples = rasterize_stack(target, pitch);
  if (samples.empty()) throw Error(ErrorKind::InsufficientData, "target contains no sample points at this pitch");
  std::vector<double> doses(samples.size());
  parallel_for(samples.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) doses[i] = dose_at(implant, samples[i], kernel);
  });
  return dvh_from_doses(doses, bins);
}

double dose_at_fraction(const DVHCurve& curve, double fraction) {
  curve.validate();
  const auto& d = curve.dose_bins;
  const auto& f = curve.cumulative_fraction;
  std::size_t last = d.size();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (f[i] >= fraction) last = i;
  if (last == d.size())
    throw Error(ErrorKind::InsufficientData,
                fmt::format("DVH never reaches fraction {} (first bin {})", fraction, f.front()));
  if (last + 1 == d.size() || f[last] == f[last + 1]) return d[last];
  const double t = (f[last] - fraction) / (f[last] - f[last + 1]);
  return d[last] + t * (d[last + 1] - d[last]);
}

}  // namespace mrtrus
