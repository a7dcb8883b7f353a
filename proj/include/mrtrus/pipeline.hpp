#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrtrus/config.hpp"
#include "mrtrus/elastic_registration.hpp"
#include "mrtrus/fusion.hpp"
#include "mrtrus/metrics.hpp"
#include "mrtrus/report.hpp"
#include "mrtrus/rigid_registration.hpp"

namespace mrtrus {

// Steps shared by the command-line tool and the HTTP service, so both
// produce identical transforms, images and reports from the same inputs.

enum class RegistrationMode { Rigid, Elastic };
RegistrationMode parse_registration_mode(std::string_view s);
std::string_view registration_mode_name(RegistrationMode m);

struct RegistrationRun {
  std::size_t moving_points = 0;
  std::size_t fixed_points = 0;
  RigidResult rigid;
  std::optional<ElasticResult> elastic;

  FusionTransform transform(RegistrationMode mode) const;
  FusionTransform final_transform() const {
    return transform(elastic ? RegistrationMode::Elastic : RegistrationMode::Rigid);
  }
};

PointCloud moving_cloud(const ContourStack& trus, const PipelineConfig& cfg);
PointCloud fixed_cloud(std::span<const ContourStack> mri, const PipelineConfig& cfg);

/// Rigid registration of the TRUS cloud onto the merged MRI stacks, then
/// the elastic stage on top when requested.
RegistrationRun run_registration(const ContourStack& trus, std::span<const ContourStack> mri,
                                 const PipelineConfig& cfg, RegistrationMode mode);

Report registration_report(const RegistrationRun& run, const PipelineConfig& cfg);

PlaneSpec plane_for(const ContourStack& geometry, int slice_index, const PipelineConfig& cfg);
inline CrossPosition default_cross(const PlaneSpec& plane) { return {plane.width / 2, plane.height / 2}; }

/// Quadrant image for one TRUS slice; `geometry` fixes the plane placement.
Image2D render_composite(const VolumeGrid& volume, const ContourStack& geometry, const ContourStack& trus,
                         const FusionTransform& f, int slice_index, const CrossPosition& cross,
                         const PipelineConfig& cfg);

std::vector<OverlayPolyline> render_overlay(std::span<const ContourStack> mri, const ContourStack& geometry,
                                            const FusionTransform& f, int slice_index, const PipelineConfig& cfg);

Report urethra_report(const UrethraResult& result);

struct VolumeComparison {
  double before_cc = 0.0;
  double after_cc = 0.0;
  double delta_cc = 0.0;
  double delta_pct = 0.0;
  SliceCountDelta slices;
  SurfaceDiff surfaces;
};

VolumeComparison compare_volumes(const ContourStack& before, const ContourStack& after, VolumeFormula formula);
Report volume_report(const VolumeComparison& cmp, VolumeFormula formula);

Report dvh_report(const DVHCurve& curve, double pitch, const DoseKernelConfig& kernel);

}  // namespace mrtrus
