#include "mrtrus/pipeline.hpp"

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/io.hpp"

namespace mrtrus {

RegistrationMode parse_registration_mode(std::string_view s) {
  if (s == "rigid") return RegistrationMode::Rigid;
  if (s == "elastic") return RegistrationMode::Elastic;
  throw Error(ErrorKind::InvalidInput, fmt::format("unknown registration mode '{}' (rigid|elastic)", s));
}

std::string_view registration_mode_name(RegistrationMode m) {
  return m == RegistrationMode::Rigid ? "rigid" : "elastic";
}

FusionTransform RegistrationRun::transform(RegistrationMode mode) const {
  if (mode == RegistrationMode::Elastic) {
    if (!elastic) throw Error(ErrorKind::InvalidInput, "no elastic registration was run");
    return elastic->transform;
  }
  return FusionTransform{rigid.transform, std::nullopt};
}

PointCloud moving_cloud(const ContourStack& trus, const PipelineConfig& cfg) {
  return cloud_from_stack(trus, cfg.trus_pixel_to_mm, cfg.sigma_trus);
}

PointCloud fixed_cloud(std::span<const ContourStack> mri, const PipelineConfig& cfg) {
  return cloud_from_stacks(mri, 1.0, cfg.sigma_mri);
}

RegistrationRun run_registration(const ContourStack& trus, std::span<const ContourStack> mri,
                                 const PipelineConfig& cfg, RegistrationMode mode) {
  cfg.validate();
  const PointCloud moving = moving_cloud(trus, cfg);
  const PointCloud fixed = fixed_cloud(mri, cfg);
  const DistanceMap map = DistanceMap::build(fixed, cfg.cell_size, cfg.margin, cfg.distance_mode);
  RegistrationRun run;
  run.moving_points = moving.size();
  run.fixed_points = fixed.size();
  run.rigid = register_rigid(moving, map, cfg.registration);
  if (mode == RegistrationMode::Elastic)
    run.elastic = register_elastic(moving, map, run.rigid.transform, cfg.registration, cfg.elastic);
  return run;
}

Report registration_report(const RegistrationRun& run, const PipelineConfig& cfg) {
  Report r;
  r.kind = "registration";
  r.add("mode", std::string(run.elastic ? "elastic" : "rigid"));
  r.add("distance_mode", std::string(cfg.distance_mode == DistanceMode::Surface ? "surface" : "points"));
  r.add("moving_points", std::to_string(run.moving_points));
  r.add("fixed_points", std::to_string(run.fixed_points));
  r.add("rigid_iterations", std::to_string(run.rigid.summary.iterations));
  r.add("rigid_energy_initial", run.rigid.summary.initial_cost);
  r.add("rigid_energy_final", run.rigid.summary.final_cost);
  if (run.elastic) {
    r.add("elastic_lambda", cfg.elastic.lambda);
    r.add("elastic_regularizer", std::string("first-order membrane"));
    r.add("elastic_levels", std::to_string(run.elastic->levels.size()));
    r.add("elastic_leaves", std::to_string(run.elastic->transform.ffd->leaf_count()));
    r.add("elastic_data_energy", run.elastic->data_energy);
    r.add("elastic_regularization_energy", run.elastic->regularization_energy);
  }
  r.add("mean_mm", run.elastic ? run.elastic->stats.mean : run.rigid.stats.mean);
  auto& t = r.table("residuals", stats_header());
  t.rows.push_back(stats_row("rigid", run.rigid.stats));
  if (run.elastic) t.rows.push_back(stats_row("elastic", run.elastic->stats));
  return r;
}

PlaneSpec plane_for(const ContourStack& geometry, int slice_index, const PipelineConfig& cfg) {
  return default_plane(geometry, slice_index, cfg.plane_width, cfg.plane_height, cfg.plane_pixel_spacing);
}

Image2D render_composite(const VolumeGrid& volume, const ContourStack& geometry, const ContourStack& trus,
                         const FusionTransform& f, int slice_index, const CrossPosition& cross,
                         const PipelineConfig& cfg) {
  const PlaneSpec plane = plane_for(geometry, slice_index, cfg);
  const Image2D us = render_trus_image(plane, trus.find(slice_index));
  const Image2D mr = reslice(volume, plane, f, Interpolation::Trilinear);
  return compose_quadrants(us, mr, cross);
}

std::vector<OverlayPolyline> render_overlay(std::span<const ContourStack> mri, const ContourStack& geometry,
                                            const FusionTransform& f, int slice_index, const PipelineConfig& cfg) {
  return project_mri_contours(mri, plane_for(geometry, slice_index, cfg), f, cfg.overlay_tolerance);
}

Report urethra_report(const UrethraResult& result) {
  Report r;
  r.kind = "urethra";
  r.add("slices", std::to_string(result.slices.size()));
  if (result.slices.size() >= 3) {
    std::vector<std::pair<int, double>> series;
    for (const auto& s : result.slices) series.emplace_back(s.slice_index, s.distance);
    r.add("apical_gradient_mm_per_slice", apical_gradient(series));
  }
  auto& per = r.table("urethra_per_slice", {"slice_index", "z_mm", "distance_mm", "in_plane_mm"});
  for (const auto& s : result.slices)
    per.rows.push_back({std::to_string(s.slice_index), format_real(s.z), format_real(s.distance),
                        format_real(s.in_plane)});
  r.table("urethra", stats_header()).rows.push_back(stats_row("urethra", result.stats));
  return r;
}

VolumeComparison compare_volumes(const ContourStack& before, const ContourStack& after, VolumeFormula formula) {
  VolumeComparison c;
  c.before_cc = stack_volume(before, formula);
  c.after_cc = stack_volume(after, formula);
  c.delta_cc = c.after_cc - c.before_cc;
  c.delta_pct = percent_change(c.before_cc, c.after_cc);
  c.slices = slice_count_delta(before, after);
  c.surfaces = surface_diff(before, after);
  return c;
}

Report volume_report(const VolumeComparison& c, VolumeFormula formula) {
  Report r;
  r.kind = "volume";
  r.add("formula", std::string(formula == VolumeFormula::Frustum ? "frustum" : "average"));
  r.add("V_before", c.before_cc);
  r.add("V_after", c.after_cc);
  r.add("delta_cc", c.delta_cc);
  r.add("delta_pct", c.delta_pct);
  r.add("slices_added_apex", std::to_string(c.slices.apex));
  r.add("slices_added_base", std::to_string(c.slices.base));
  auto& per = r.table("surface_diff", {"slice_index", "area_before_cm2", "area_after_cm2", "signed_cm2", "absolute_cm2"});
  for (const auto& s : c.surfaces.slices)
    per.rows.push_back({std::to_string(s.slice_index), format_real(s.area_a), format_real(s.area_b),
                        format_real(s.signed_diff), format_real(s.absolute_diff)});
  auto& st = r.table("surface_diff_stats", stats_header());
  st.rows.push_back(stats_row("signed", c.surfaces.signed_stats));
  st.rows.push_back(stats_row("absolute", c.surfaces.absolute_stats));
  return r;
}

Report dvh_report(const DVHCurve& curve, double pitch, const DoseKernelConfig& kernel) {
  Report r;
  r.kind = "dvh";
  r.add("banner", std::string(kSimplifiedKernelBanner));
  r.add("mu_per_cm", kernel.mu_per_cm);
  r.add("r_min_cm", kernel.r_min_cm);
  r.add("pitch_mm", pitch);
  r.add("bins", std::to_string(curve.dose_bins.size()));
  r.add("D90_gy", d90(curve));
  return r;
}

}  // namespace mrtrus
