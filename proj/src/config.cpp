#include "mrtrus/config.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/io.hpp"

namespace mrtrus {

namespace {

double real_value(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
    throw Error(ErrorKind::InvalidConfig, fmt::format("{}: '{}' is not a finite number", key, v));
  return out;
}

long long int_value(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw Error(ErrorKind::InvalidConfig, fmt::format("{}: '{}' is not an integer", key, v));
  return out;
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  auto real = [&] { return real_value(key, value); };
  auto integer = [&] { return static_cast<int>(int_value(key, value)); };
  if (key == "max_iterations") registration.max_iterations = integer();
  else if (key == "cost_tolerance") registration.cost_tolerance = real();
  else if (key == "param_tolerance") registration.param_tolerance = real();
  else if (key == "lm_lambda_init") registration.lm_lambda_init = real();
  else if (key == "lm_lambda_factor") registration.lm_lambda_factor = real();
  else if (key == "rng_seed") registration.rng_seed = static_cast<std::uint64_t>(int_value(key, value));
  else if (key == "elastic_lambda") elastic.lambda = real();
  else if (key == "max_depth") elastic.max_depth = integer();
  else if (key == "refine_threshold") elastic.refine_threshold = real();
  else if (key == "octree_padding") elastic.padding = real();
  else if (key == "sigma_trus") sigma_trus = real();
  else if (key == "sigma_mri") sigma_mri = real();
  else if (key == "trus_pixel_to_mm") trus_pixel_to_mm = real();
  else if (key == "cell_size") cell_size = real();
  else if (key == "margin") margin = real();
  else if (key == "overlay_tolerance") overlay_tolerance = real();
  else if (key == "match_tolerance") match_tolerance = real();
  else if (key == "dose_mu") kernel.mu_per_cm = real();
  else if (key == "dose_r_min") kernel.r_min_cm = real();
  else if (key == "plane_width") plane_width = integer();
  else if (key == "plane_height") plane_height = integer();
  else if (key == "plane_pixel_spacing") plane_pixel_spacing = real();
  else if (key == "distance_mode") {
    if (value == "surface") distance_mode = DistanceMode::Surface;
    else if (value == "points") distance_mode = DistanceMode::Points;
    else throw Error(ErrorKind::InvalidConfig, fmt::format("distance_mode: '{}' is not surface|points", value));
  } else if (key == "volume_formula") {
    if (value == "frustum") volume_formula = VolumeFormula::Frustum;
    else if (value == "average") volume_formula = VolumeFormula::Average;
    else throw Error(ErrorKind::InvalidConfig, fmt::format("volume_formula: '{}' is not frustum|average", value));
  } else {
    throw Error(ErrorKind::InvalidConfig, fmt::format("unknown config key '{}'", key));
  }
}

void PipelineConfig::validate() const {
  registration.validate();
  auto positive = [](double v, std::string_view name) {
    if (!(v > 0.0)) throw Error(ErrorKind::InvalidConfig, fmt::format("{} must be positive", name));
  };
  if (!(elastic.lambda >= 0.0)) throw Error(ErrorKind::InvalidConfig, "elastic_lambda must be >= 0");
  if (elastic.max_depth < 1 || elastic.max_depth > 8) throw Error(ErrorKind::InvalidConfig, "max_depth must be in [1, 8]");
  positive(elastic.refine_threshold, "refine_threshold");
  if (!(elastic.padding >= 0.0)) throw Error(ErrorKind::InvalidConfig, "octree_padding must be >= 0");
  positive(sigma_trus, "sigma_trus");
  positive(sigma_mri, "sigma_mri");
  positive(trus_pixel_to_mm, "trus_pixel_to_mm");
  positive(cell_size, "cell_size");
  if (!(margin >= 0.0)) throw Error(ErrorKind::InvalidConfig, "margin must be >= 0");
  positive(overlay_tolerance, "overlay_tolerance");
  positive(match_tolerance, "match_tolerance");
  kernel.validate();
  if (plane_width < 1 || plane_height < 1) throw Error(ErrorKind::InvalidConfig, "plane size must be >= 1");
  positive(plane_pixel_spacing, "plane_pixel_spacing");
}

PipelineConfig apply_overrides(PipelineConfig base, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) base.set(k, v);
  base.validate();
  return base;
}

PipelineConfig parse_pipeline_config(std::string_view text) {
  return apply_overrides(PipelineConfig{}, parse_key_values(text));
}

}  // namespace mrtrus
