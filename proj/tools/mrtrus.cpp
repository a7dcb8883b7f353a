// mrtrus: command-line front end for the MRI/TRUS fusion pipeline.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mrtrus/config.hpp"
#include "mrtrus/error.hpp"
#include "mrtrus/io.hpp"
#include "mrtrus/parallel.hpp"
#include "mrtrus/phantom.hpp"
#include "mrtrus/pipeline.hpp"
#include "mrtrus/report.hpp"
#include "mrtrus/service.hpp"

namespace fs = std::filesystem;
using namespace mrtrus;

namespace {

constexpr int kExitParse = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitPrecondition = 3;

PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return parse_pipeline_config(read_file(path));
}

CrossPosition parse_cross_flag(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw Error(ErrorKind::InvalidInput, fmt::format("--cross '{}' must be cx,cy", s));
  try {
    return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidInput, fmt::format("--cross '{}' must be two integers", s));
  }
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MRI/TRUS registration, fusion, volumetry and DVH toolkit"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency); results do not depend on it");

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Write a synthetic ground-truth scene");
  std::string spec_path, out_dir;
  std::optional<std::uint64_t> seed;
  phantom->add_option("--spec", spec_path, "Phantom spec (key=value)")->check(CLI::ExistingFile);
  phantom->add_option("--seed", seed, "RNG seed (overrides the spec file)");
  phantom->add_option("--out", out_dir, "Output directory")->required();

  // register
  auto* reg = app.add_subcommand("register", "Register a TRUS stack onto MRI stacks");
  std::string moving, mode = "rigid", config_path, transform_out, report_out;
  std::vector<std::string> fixed;
  reg->add_option("--moving", moving, "TRUS contour stack")->required()->check(CLI::ExistingFile);
  reg->add_option("--fixed", fixed, "MRI contour stacks (one or more)")->required()->check(CLI::ExistingFile);
  reg->add_option("--mode", mode, "rigid|elastic")->check(CLI::IsMember({"rigid", "elastic"}));
  reg->add_option("--config", config_path, "Config file (key=value)")->check(CLI::ExistingFile);
  reg->add_option("--out", transform_out, "Transform output")->required();
  reg->add_option("--report", report_out, "Report output");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Write quadrant composites and MRI contour overlays");
  std::string volume_path, trus_path, transform_path, cross_flag;
  std::vector<std::string> mri_paths;
  std::optional<int> slice;
  bool all = false;
  fuse->add_option("--volume", volume_path, "MRI volume header")->required()->check(CLI::ExistingFile);
  fuse->add_option("--trus", trus_path, "TRUS contour stack")->required()->check(CLI::ExistingFile);
  fuse->add_option("--transform", transform_path, "TRUS->MRI transform")->required()->check(CLI::ExistingFile);
  auto* slice_opt = fuse->add_option("--slice", slice, "TRUS slice index");
  auto* all_opt = fuse->add_flag("--all", all, "Every TRUS slice");
  slice_opt->excludes(all_opt);
  fuse->add_option("--cross", cross_flag, "Cross position cx,cy in pixels (default: image centre)");
  fuse->add_option("--mri", mri_paths, "MRI contour stacks to overlay")->check(CLI::ExistingFile);
  fuse->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  fuse->add_option("--out", out_dir, "Output directory")->required();

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Urethra lumen-centre distances per slice");
  std::string trus_lm, mri_lm;
  metrics->add_option("--transform", transform_path, "TRUS->MRI transform")->required()->check(CLI::ExistingFile);
  metrics->add_option("--trus-landmarks", trus_lm, "TRUS lumen centres")->required()->check(CLI::ExistingFile);
  metrics->add_option("--mri-landmarks", mri_lm, "MRI lumen centres")->required()->check(CLI::ExistingFile);
  metrics->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  metrics->add_option("--out", report_out, "Report output")->required();

  // volume
  auto* volume = app.add_subcommand("volume", "Compare the volume of two slice stacks");
  std::string before, after, formula = "frustum";
  volume->add_option("--before", before, "Original stack")->required()->check(CLI::ExistingFile);
  volume->add_option("--after", after, "Edited stack")->required()->check(CLI::ExistingFile);
  volume->add_option("--formula", formula, "frustum|average")->check(CLI::IsMember({"frustum", "average"}));
  volume->add_option("--out", report_out, "Report output")->required();

  // dvh
  auto* dvh = app.add_subcommand("dvh", "Cumulative DVH and D90 with the simplified kernel");
  std::string seeds_path, target_path, bins = "0:300:1", csv_out;
  double pitch = 1.0;
  dvh->add_option("--seeds", seeds_path, "Seed file")->required()->check(CLI::ExistingFile);
  dvh->add_option("--target", target_path, "Target contour stack")->required()->check(CLI::ExistingFile);
  dvh->add_option("--bins", bins, "Dose grid start:stop:step in Gy");
  dvh->add_option("--pitch", pitch, "Sampling pitch in mm");
  dvh->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  dvh->add_option("--out", csv_out, "CSV output")->required();
  dvh->add_option("--report", report_out, "Report output");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP fusion service");
  int port = 8080;
  std::string host = "127.0.0.1", data_dir = ".";
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--data", data_dir, "Directory that session paths resolve against")->check(CLI::ExistingDirectory);
  serve->add_option("--config", config_path, "Default config")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    set_thread_count(threads);
    if (*phantom) {
      PhantomSpec spec = spec_path.empty() ? PhantomSpec{} : parse_phantom_spec(read_file(spec_path));
      if (seed) spec.rng_seed = *seed;
      const PhantomScene scene = generate_phantom(spec);
      write_phantom_scene(scene, out_dir);
      fmt::print("trus_slices: {}\ntrus_points: {}\nmri_points: {}\n", scene.trus_stack.size(),
                 cloud_from_stack(scene.trus_stack).size(), cloud_from_stacks(scene.mri_stacks).size());
    } else if (*reg) {
      const PipelineConfig cfg = load_config(config_path);
      const ContourStack trus = read_contour_stack(moving);
      std::vector<ContourStack> mri;
      for (const auto& p : fixed) mri.push_back(read_contour_stack(p));
      const RegistrationRun run = run_registration(trus, mri, cfg, parse_registration_mode(mode));
      write_transform(transform_out, run.final_transform());
      const Report report = registration_report(run, cfg);
      if (!report_out.empty()) write_file(report_out, encode_report(report));
      fmt::print("mode: {}\nmean_mm: {}\n", mode, *report.field("mean_mm"));
    } else if (*fuse) {
      if (!slice && !all) throw Error(ErrorKind::InvalidInput, "fuse needs --slice K or --all");
      const PipelineConfig cfg = load_config(config_path);
      const VolumeGrid vol = read_volume(volume_path);
      const ContourStack trus = read_contour_stack(trus_path);
      const FusionTransform f = read_transform(transform_path);
      std::vector<ContourStack> mri;
      for (const auto& p : mri_paths) mri.push_back(read_contour_stack(p));
      std::vector<int> slices;
      if (all) {
        for (const auto& c : trus.contours()) slices.push_back(c.slice_index);
      } else {
        slices.push_back(*slice);
      }
      for (int k : slices) {
        const PlaneSpec plane = plane_for(trus, k, cfg);
        const CrossPosition cross = cross_flag.empty() ? default_cross(plane) : parse_cross_flag(cross_flag);
        const Image2D img = render_composite(vol, trus, trus, f, k, cross, cfg);
        write_file(fs::path(out_dir) / fmt::format("slice_{:03}.pgm", k), encode_pgm(img));
        write_file(fs::path(out_dir) / fmt::format("slice_{:03}.overlay", k),
                   encode_overlay(render_overlay(mri, trus, f, k, cfg)));
      }
      fmt::print("slices: {}\n", slices.size());
    } else if (*metrics) {
      const PipelineConfig cfg = load_config(config_path);
      const FusionTransform f = read_transform(transform_path);
      const LandmarkFile t = read_landmarks(trus_lm);
      const LandmarkFile m = read_landmarks(mri_lm);
      if (t.series.empty()) throw Error(ErrorKind::InvalidInput, "TRUS landmark file has no 'S' records");
      const UrethraResult res = urethra_distance(t.series, m.points, f, cfg.match_tolerance);
      write_file(report_out, encode_report(urethra_report(res)));
      fmt::print("urethra_mean_mm: {}\nurethra_max_mm: {}\n", format_real(res.stats.mean), format_real(res.stats.max));
    } else if (*volume) {
      const VolumeFormula vf = formula == "average" ? VolumeFormula::Average : VolumeFormula::Frustum;
      const VolumeComparison cmp = compare_volumes(read_contour_stack(before), read_contour_stack(after), vf);
      write_file(report_out, encode_report(volume_report(cmp, vf)));
      fmt::print("V_before: {}\nV_after: {}\ndelta_pct: {}\n", format_real(cmp.before_cc), format_real(cmp.after_cc),
                 format_real(cmp.delta_pct));
    } else if (*dvh) {
      const PipelineConfig cfg = load_config(config_path);
      const DVHCurve curve =
          compute_dvh(read_seeds(seeds_path), read_contour_stack(target_path), cfg.kernel, parse_bins(bins), pitch);
      write_file(csv_out, encode_dvh_csv(curve));
      if (!report_out.empty()) write_file(report_out, encode_report(dvh_report(curve, pitch, cfg.kernel)));
      fmt::print("{}\nD90_gy: {}\n", kSimplifiedKernelBanner, format_real(d90(curve)));
    } else if (*serve) {
      FusionService service(data_dir, load_config(config_path));
      HttpServer server(service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      fmt::print(stderr, "serving on {}:{}\n", host, port);
      server.run(host, port);
      g_server = nullptr;
    }
  } catch (const ParseError& e) {
    fmt::print(stderr, "error: {}: {}\n", e.name(), e.what());
    return kExitParse;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}: {}\n", e.name(), e.what());
    return e.kind() == ErrorKind::NonFinite ? kExitNumeric : kExitPrecondition;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitPrecondition;
  }
  return 0;
}
