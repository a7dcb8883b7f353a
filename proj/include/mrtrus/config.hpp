#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrtrus/elastic_registration.hpp"
#include "mrtrus/metrics.hpp"
#include "mrtrus/rigid_registration.hpp"
#include "mrtrus/volumetry.hpp"

namespace mrtrus {

/// Every tunable of the pipeline, settable from key=value text.
struct PipelineConfig {
  RegistrationConfig registration;
  ElasticOptions elastic;
  double sigma_trus = kDefaultSigma;
  double sigma_mri = kDefaultSigma;
  double trus_pixel_to_mm = 1.0;
  double cell_size = 1.0;
  double margin = 15.0;
  DistanceMode distance_mode = DistanceMode::Surface;
  double overlay_tolerance = 1.5;
  double match_tolerance = kDefaultMatchTolerance;
  DoseKernelConfig kernel;
  VolumeFormula volume_formula = VolumeFormula::Frustum;
  int plane_width = 160;
  int plane_height = 160;
  double plane_pixel_spacing = 0.5;

  /// Throws InvalidConfig for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  void validate() const;
};

PipelineConfig parse_pipeline_config(std::string_view text);
PipelineConfig apply_overrides(PipelineConfig base, const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace mrtrus
