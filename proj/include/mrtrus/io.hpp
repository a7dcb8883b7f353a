#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mrtrus/metrics.hpp"
#include "mrtrus/octree_spline.hpp"
#include "mrtrus/types.hpp"
#include "mrtrus/volumetry.hpp"

namespace mrtrus {

/// Shortest text that round-trips a double ("{:.17g}").
std::string format_real(double v);

/// Line-oriented tokenizer shared by the text readers. Blank lines are
/// skipped; every failure is a ParseError carrying the 1-based line number.
class LineReader {
 public:
  explicit LineReader(std::string_view text);

  bool at_end();
  int line() const noexcept { return line_; }
  /// Next non-blank line split on whitespace; `what` names the expected
  /// record in the end-of-file message.
  std::vector<std::string_view> tokens(std::string_view what);
  /// Next non-blank line verbatim (trailing CR and spaces removed).
  std::string_view raw_line(std::string_view what);
  void expect_exact(std::string_view expected);
  [[noreturn]] void fail(const std::string& message) const;

  int to_int(std::string_view s) const;
  double to_real(std::string_view s) const;

 private:
  bool advance();
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 0;
  std::string_view current_;
  bool pending_ = false;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::string encode_contour_stack(const ContourStack& stack);
ContourStack decode_contour_stack(std::string_view text);
ContourStack read_contour_stack(const std::filesystem::path& path);
void write_contour_stack(const std::filesystem::path& path, const ContourStack& stack);

/// One "SLICE <index> <z> <n>" record followed by its points.
std::string encode_slice(const PlanarContour& c);
PlanarContour decode_slice(std::string_view text);

std::string encode_volume_header(const VolumeGrid& volume);
std::string encode_volume_raw(const VolumeGrid& volume);
VolumeGrid decode_volume(std::string_view header, std::string_view raw);
/// Raw companion of a header path: same stem, ".raw" extension.
std::filesystem::path raw_path_for(const std::filesystem::path& header);
VolumeGrid read_volume(const std::filesystem::path& header, const std::filesystem::path& raw);
VolumeGrid read_volume(const std::filesystem::path& header);
void write_volume(const std::filesystem::path& header, const std::filesystem::path& raw, const VolumeGrid& volume);
void write_volume(const std::filesystem::path& header, const VolumeGrid& volume);

std::string encode_transform(const FusionTransform& f);
FusionTransform decode_transform(std::string_view text);
FusionTransform read_transform(const std::filesystem::path& path);
void write_transform(const std::filesystem::path& path, const FusionTransform& f);

/// LANDMARKS v1 holds either per-slice 2-D centres ("S" records) or free
/// 3-D points ("P" records), never both.
struct LandmarkFile {
  Modality modality = Modality::Trus;
  LandmarkSeries series;
  std::vector<Point3> points;
};

std::string encode_landmarks(const LandmarkSeries& series);
std::string encode_landmarks(Modality modality, std::span<const Point3> points);
LandmarkFile decode_landmarks(std::string_view text);
LandmarkFile read_landmarks(const std::filesystem::path& path);

std::string encode_seeds(const SeedImplant& implant);
SeedImplant decode_seeds(std::string_view text);
SeedImplant read_seeds(const std::filesystem::path& path);

std::string encode_dvh_csv(const DVHCurve& curve);
DVHCurve decode_dvh_csv(std::string_view text);

/// Scene description consumed by the service and by `mrtrus` scripts.
/// Relative paths are resolved against the directory given to load.
struct SessionFile {
  std::filesystem::path trus;
  std::filesystem::path mri_transverse;
  std::filesystem::path mri_sagittal;
  std::filesystem::path mri_coronal;
  std::filesystem::path volume;
  std::filesystem::path trus_landmarks;  // optional
  std::filesystem::path mri_landmarks;   // optional
  std::filesystem::path seeds;           // optional
  std::string mode = "elastic";
  std::vector<std::pair<std::string, std::string>> config;
  std::filesystem::path output_dir;  // optional

  /// Throws InvalidInput when a referenced file is missing.
  void check_files() const;
};

std::string encode_session(const SessionFile& session);
SessionFile decode_session(std::string_view text, const std::filesystem::path& base_dir);

/// key=value lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

}  // namespace mrtrus
