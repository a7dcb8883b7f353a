#pragma once

#include <span>
#include <string>
#include <vector>

#include "mrtrus/octree_spline.hpp"
#include "mrtrus/types.hpp"

namespace mrtrus {

/// Pixel (x, y) of a TRUS plane sits at (origin + (x, y) * pixel_spacing, z)
/// in the TRUS frame; row 0 is the top of the image.
struct PlaneSpec {
  int slice_index = 0;
  double z = 0.0;
  int width = 160;
  int height = 160;
  double pixel_spacing = 0.5;
  Point2 origin = Point2::Zero();

  void validate() const;
  Point3 pixel_position(double x, double y) const {
    return {origin.x() + x * pixel_spacing, origin.y() + y * pixel_spacing, z};
  }
  Point2 to_pixel(const Point3& p) const {
    return {(p.x() - origin.x()) / pixel_spacing, (p.y() - origin.y()) / pixel_spacing};
  }
};

struct CrossPosition {
  int cx = 0;
  int cy = 0;
};

enum class Interpolation { Nearest, Trilinear };

/// Samples the volume at f(pixel) for every pixel and windows the result to
/// 8 bits over the volume's global min/max. Samples outside the volume, and
/// every sample of a constant volume, map to 0.
Image2D reslice(const VolumeGrid& volume, const PlaneSpec& plane, const FusionTransform& f,
                Interpolation interp = Interpolation::Trilinear);

/// Upper-right and lower-left quadrants from TRUS, the other two from MRI;
/// the cross lines (x == cx, y == cy) are drawn at 255.
Image2D compose_quadrants(const Image2D& trus, const Image2D& mri, const CrossPosition& cross);

enum class QuadrantSource { Trus, Mri, Cross };
QuadrantSource quadrant_source(int x, int y, const CrossPosition& cross);

struct OverlayPolyline {
  Modality modality = Modality::MriTransverse;
  std::vector<Point2> pixels;
};

inline constexpr double kDefaultOverlayTolerance = 1.5;

/// MRI contour points pulled back into the TRUS frame through f^-1; runs of
/// consecutive points within `tolerance` of the plane become polylines in
/// pixel coordinates.
std::vector<OverlayPolyline> project_mri_contours(std::span<const ContourStack> mri_stacks, const PlaneSpec& plane,
                                                  const FusionTransform& f,
                                                  double tolerance = kDefaultOverlayTolerance);

/// Stand-in TRUS frame when no acquired image is available: gland interior,
/// background and the delineated contour at fixed gray levels.
Image2D render_trus_image(const PlaneSpec& plane, const PlanarContour* contour);

/// Plane geometry used by both the CLI and the service, so their composites
/// are byte-identical: fixed size, centred on the stack's in-plane bounds.
PlaneSpec default_plane(const ContourStack& trus, int slice_index, int width = 160, int height = 160,
                        double pixel_spacing = 0.5);

std::string encode_pgm(const Image2D& image);
Image2D decode_pgm(const std::string& bytes);
std::string encode_overlay(std::span<const OverlayPolyline> polylines);
std::vector<OverlayPolyline> decode_overlay(const std::string& text);

}  // namespace mrtrus
