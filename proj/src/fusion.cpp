#include "mrtrus/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/geometry.hpp"
#include "mrtrus/io.hpp"

namespace mrtrus {

void PlaneSpec::validate() const {
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidInput, "plane dimensions must be >= 1");
  if (!(pixel_spacing > 0.0)) throw Error(ErrorKind::InvalidInput, "plane pixel spacing must be positive");
}

namespace {

double sample_nearest(const VolumeGrid& vol, const Vec3& u, bool& inside) {
  const auto& d = vol.dims();
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    const double r = std::floor(u[a] + 0.5);
    if (!(r >= 0.0 && r <= d[a] - 1)) {
      inside = false;
      return 0.0;
    }
    idx[a] = static_cast<int>(r);
  }
  inside = true;
  return vol.at(idx[0], idx[1], idx[2]);
}

double sample_trilinear(const VolumeGrid& vol, const Vec3& u, bool& inside) {
  const auto& d = vol.dims();
  constexpr double eps = 1e-9;
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (!(u[a] >= -eps && u[a] <= d[a] - 1 + eps)) {
      inside = false;
      return 0.0;
    }
    const double c = std::clamp(u[a], 0.0, static_cast<double>(d[a] - 1));
    base[a] = std::min(static_cast<int>(std::floor(c)), std::max(d[a] - 2, 0));
    frac[a] = d[a] > 1 ? c - base[a] : 0.0;
  }
  inside = true;
  double v = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
    const double w = (di ? frac[0] : 1 - frac[0]) * (dj ? frac[1] : 1 - frac[1]) * (dk ? frac[2] : 1 - frac[2]);
    if (w == 0.0) continue;
    v += w * vol.at(std::min(base[0] + di, d[0] - 1), std::min(base[1] + dj, d[1] - 1),
                    std::min(base[2] + dk, d[2] - 1));
  }
  return v;
}

}  // namespace

Image2D reslice(const VolumeGrid& volume, const PlaneSpec& plane, const FusionTransform& f, Interpolation interp) {
  plane.validate();
  const auto [lo, hi] = volume.intensity_range();
  const double range = static_cast<double>(hi) - static_cast<double>(lo);
  Image2D out(plane.width, plane.height, plane.pixel_spacing, 0);
  for (int y = 0; y < plane.height; ++y)
    for (int x = 0; x < plane.width; ++x) {
      const Vec3 u = volume.to_voxel(f.apply(plane.pixel_position(x, y)));
      bool inside = false;
      const double v = interp == Interpolation::Nearest ? sample_nearest(volume, u, inside)
                                                         : sample_trilinear(volume, u, inside);
      if (!inside || !(range > 0.0)) continue;
      const double scaled = std::clamp(255.0 * (v - lo) / range, 0.0, 255.0);
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(scaled));
    }
  return out;
}

QuadrantSource quadrant_source(int x, int y, const CrossPosition& cross) {
  if (x == cross.cx || y == cross.cy) return QuadrantSource::Cross;
  if ((x >= cross.cx && y < cross.cy) || (x < cross.cx && y >= cross.cy)) return QuadrantSource::Trus;
  return QuadrantSource::Mri;
}

Image2D compose_quadrants(const Image2D& trus, const Image2D& mri, const CrossPosition& cross) {
  if (trus.width != mri.width || trus.height != mri.height)
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("TRUS {}x{} vs MRI {}x{}", trus.width, trus.height, mri.width, mri.height));
  if (cross.cx < 0 || cross.cx > trus.width || cross.cy < 0 || cross.cy > trus.height)
    throw Error(ErrorKind::InvalidInput, fmt::format("cross ({}, {}) outside the image", cross.cx, cross.cy));
  Image2D out(trus.width, trus.height, trus.pixel_spacing, 0);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      switch (quadrant_source(x, y, cross)) {
        case QuadrantSource::Cross: out.at(x, y) = 255; break;
        case QuadrantSource::Trus: out.at(x, y) = trus.at(x, y); break;
        case QuadrantSource::Mri: out.at(x, y) = mri.at(x, y); break;
      }
    }
  return out;
}

std::vector<OverlayPolyline> project_mri_contours(std::span<const ContourStack> mri_stacks, const PlaneSpec& plane,
                                                  const FusionTransform& f, double tolerance) {
  std::vector<OverlayPolyline> out;
  for (const auto& stack : mri_stacks) {
    for (const auto& contour : stack.contours()) {
      const std::size_t n = contour.points.size();
      std::vector<Point2> pixels(n);
      std::vector<char> keep(n, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const Point3 m = stack_to_frame(stack.modality(), contour.points[i].x(), contour.points[i].y(), contour.z);
        const Point3 p = f.inverse_apply(m);
        keep[i] = std::abs(p.z() - plane.z) <= tolerance;
        pixels[i] = plane.to_pixel(p);
      }
      if (std::all_of(keep.begin(), keep.end(), [](char k) { return k != 0; })) {
        out.push_back({stack.modality(), pixels});
        continue;
      }
      // start after a gap so runs that wrap past the last vertex stay whole
      std::size_t start = 0;
      while (keep[start]) ++start;
      OverlayPolyline run{stack.modality(), {}};
      for (std::size_t step = 1; step <= n; ++step) {
        const std::size_t i = (start + step) % n;
        if (keep[i]) {
          run.pixels.push_back(pixels[i]);
        } else if (!run.pixels.empty()) {
          out.push_back(std::move(run));
          run = OverlayPolyline{stack.modality(), {}};
        }
      }
      if (!run.pixels.empty()) out.push_back(std::move(run));
    }
  }
  return out;
}

Image2D render_trus_image(const PlaneSpec& plane, const PlanarContour* contour) {
  plane.validate();
  constexpr std::uint8_t kBackground = 60;
  constexpr std::uint8_t kGland = 130;
  constexpr std::uint8_t kEdge = 220;
  Image2D img(plane.width, plane.height, plane.pixel_spacing, kBackground);
  if (!contour) return img;
  const std::span<const Point2> poly(contour->points);
  for (int y = 0; y < plane.height; ++y)
    for (int x = 0; x < plane.width; ++x) {
      const Point3 p = plane.pixel_position(x, y);
      const Point2 q(p.x(), p.y());
      if (distance_to_polygon_boundary(poly, q) <= 0.5 * plane.pixel_spacing)
        img.at(x, y) = kEdge;
      else if (point_in_polygon(poly, q))
        img.at(x, y) = kGland;
    }
  return img;
}

PlaneSpec default_plane(const ContourStack& trus, int slice_index, int width, int height, double pixel_spacing) {
  PlaneSpec plane;
  plane.slice_index = slice_index;
  plane.z = trus.z_of(slice_index);
  plane.width = width;
  plane.height = height;
  plane.pixel_spacing = pixel_spacing;
  Point2 centre = Point2::Zero();
  if (!trus.empty()) {
    Point2 lo = trus.contours().front().points.front();
    Point2 hi = lo;
    for (const auto& c : trus.contours())
      for (const auto& p : c.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    centre = 0.5 * (lo + hi);
  }
  plane.origin = centre - 0.5 * pixel_spacing * Point2(width - 1, height - 1);
  plane.validate();
  return plane;
}

std::string encode_pgm(const Image2D& image) {
  std::string out = fmt::format("P5\n{} {}\n255\n", image.width, image.height);
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

Image2D decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P5" || maxval != 255 || w < 1 || h < 1) throw ParseError(1, "not a binary 8-bit PGM");
  in.get();
  Image2D img(w, h, 1.0);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw ParseError(0, "PGM pixel data truncated");
  return img;
}

std::string encode_overlay(std::span<const OverlayPolyline> polylines) {
  std::string out = "OVERLAY v1\n";
  for (const auto& pl : polylines) {
    out += fmt::format("P {} {}\n", modality_name(pl.modality), pl.pixels.size());
    for (const auto& p : pl.pixels) out += fmt::format("{} {}\n", format_real(p.x()), format_real(p.y()));
  }
  return out;
}

std::vector<OverlayPolyline> decode_overlay(const std::string& text) {
  LineReader reader(text);
  reader.expect_exact("OVERLAY v1");
  std::vector<OverlayPolyline> out;
  while (!reader.at_end()) {
    auto tok = reader.tokens("P <modality> <n>");
    if (tok.size() != 3 || tok[0] != "P") reader.fail("expected 'P <modality> <n>'");
    OverlayPolyline pl;
    pl.modality = parse_modality(tok[1]);
    const int n = reader.to_int(tok[2]);
    for (int i = 0; i < n; ++i) {
      auto xy = reader.tokens("x y");
      if (xy.size() != 2) reader.fail("expected 'x y'");
      pl.pixels.emplace_back(reader.to_real(xy[0]), reader.to_real(xy[1]));
    }
    out.push_back(std::move(pl));
  }
  return out;
}

}  // namespace mrtrus
