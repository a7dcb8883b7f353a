#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mrtrus/types.hpp"

namespace mrtrus {

enum class VolumeFormula {
  Frustum,  // (S_i + S_i+1 + sqrt(S_i S_i+1)) / 3 * d
  Average,  // (S_i + S_i+1) / 2 * d
};

/// Volume (cc) of a slice stack from consecutive slice areas.
double stack_volume(const ContourStack& stack, VolumeFormula formula = VolumeFormula::Frustum);

/// 100 * (v1 - v0) / v0
double percent_change(double v0, double v1);

struct Seed {
  Point3 position = Point3::Zero();
  double strength = 1.0;
};

struct SeedImplant {
  std::vector<Seed> seeds;
  void validate() const;
};

/// Point-source kernel strength * exp(-mu r) / r^2 with r in cm. This is a
/// deliberately simplified model, not TG-43.
struct DoseKernelConfig {
  double mu_per_cm = 0.10;
  double r_min_cm = 0.05;
  void validate() const;
};

inline constexpr std::string_view kSimplifiedKernelBanner =
    "SIMPLIFIED KERNEL: point source strength*exp(-mu*r)/r^2, not TG-43";

double dose_at(const SeedImplant& implant, const Point3& p, const DoseKernelConfig& kernel = {});

struct DVHCurve {
  std::vector<double> dose_bins;            // Gy, ascending
  std::vector<double> cumulative_fraction;  // fraction of volume with dose >= bin
  void validate() const;
};

/// Inclusive "start:stop:step" grid in Gy.
std::vector<double> parse_bins(std::string_view spec);

DVHCurve dvh_from_doses(std::span<const double> doses, std::span<const double> bins);

/// Sample points of the stack interior on a `pitch` mm lattice. Each
/// lattice plane takes the contour of the nearest slice; planes outside
/// [first z, last z] are dropped.
std::vector<Point3> rasterize_stack(const ContourStack& target, double pitch);

DVHCurve compute_dvh(const SeedImplant& implant, const ContourStack& target, const DoseKernelConfig& kernel,
                     std::span<const double> bins, double pitch);

/// Largest dose whose cumulative fraction is still >= `fraction`, linearly
/// interpolated toward the next bin.
double dose_at_fraction(const DVHCurve& curve, double fraction);
inline double d90(const DVHCurve& curve) { return dose_at_fraction(curve, 0.90); }

}  // namespace mrtrus
