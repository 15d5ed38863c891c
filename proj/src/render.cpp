#include "lanegraph/render.hpp"

#include <algorithm>
#include <cmath>

namespace lanegraph {
namespace {

constexpr Rgb kWarm[] = {{230, 60, 40}, {250, 150, 30}, {240, 220, 50}, {200, 40, 120}};
constexpr Rgb kCool[] = {{40, 120, 240}, {40, 200, 120}, {60, 220, 230}, {130, 90, 230}};

void put(RgbImage& img, long r, long c, const Rgb& color, int row_offset = 0) {
  if (r < 0 || c < 0 || r >= img.height - row_offset || c >= img.width) return;
  std::copy(color.begin(), color.end(), img.at(static_cast<int>(r) + row_offset, static_cast<int>(c)));
}

void draw_lines(RgbImage& img, const std::vector<Polyline>& lines, Rgb (*palette)(int),
                int row_offset, int height) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Rgb color = palette(static_cast<int>(i));
    const auto& pts = lines[i].points();
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      for_each_segment_pixel(pts[k], pts[k + 1], [&](Eigen::Index r, Eigen::Index c) {
        if (r < height) put(img, r, c, color, row_offset);
      });
    }
  }
}

void draw_vertices(RgbImage& img, const std::vector<Polyline>& lines, Rgb (*palette)(int),
                   int row_offset, int height) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (const Point& p : lines[i].points()) {
      const long r = std::lround(p.y());
      if (r < height) put(img, r, std::lround(p.x()), palette(static_cast<int>(i)), row_offset);
    }
  }
}

void draw_forks(RgbImage& img, const std::vector<Point>& forks, int row_offset, int height) {
  for (const Point& p : forks) {
    const long r0 = std::lround(p.y()), c0 = std::lround(p.x());
    for (long r = r0 - 2; r <= r0 + 2; ++r) {
      for (long c = c0 - 2; c <= c0 + 2; ++c) {
        if (r >= 0 && r < height) put(img, r, c, kForkMarker, row_offset);
      }
    }
  }
}

void blit_gray(RgbImage& img, const IntensityRaster& raster, int row_offset) {
  for (int r = 0; r < raster.height(); ++r) {
    for (int c = 0; c < raster.width(); ++c) {
      const double v = std::clamp(raster.values(r, c), 0.0, 1.0);
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * v));
      put(img, r, c, {g, g, g}, row_offset);
    }
  }
}

}  // namespace

Rgb prediction_color(int index) { return kWarm[index % std::size(kWarm)]; }
Rgb ground_truth_color(int index) { return kCool[index % std::size(kCool)]; }

RgbImage grayscale(const IntensityRaster& raster) {
  RgbImage img(static_cast<int>(raster.height()), static_cast<int>(raster.width()));
  blit_gray(img, raster, 0);
  return img;
}

RgbImage render_overlay(const IntensityRaster& raster, const Overlay& overlay) {
  RgbImage img = grayscale(raster);
  const int h = img.height;
  draw_lines(img, overlay.ground_truth, ground_truth_color, 0, h);
  draw_lines(img, overlay.predictions, prediction_color, 0, h);
  draw_vertices(img, overlay.ground_truth, ground_truth_color, 0, h);
  draw_vertices(img, overlay.predictions, prediction_color, 0, h);
  draw_forks(img, overlay.forks, 0, h);
  return img;
}

RgbImage render_side_by_side(const IntensityRaster& raster, const Overlay& overlay) {
  const int h = static_cast<int>(raster.height());
  RgbImage img(2 * h, static_cast<int>(raster.width()));
  blit_gray(img, raster, 0);
  blit_gray(img, raster, h);
  draw_lines(img, overlay.predictions, prediction_color, 0, h);
  draw_vertices(img, overlay.predictions, prediction_color, 0, h);
  draw_forks(img, overlay.forks, 0, h);
  draw_lines(img, overlay.ground_truth, ground_truth_color, h, h);
  draw_vertices(img, overlay.ground_truth, ground_truth_color, h, h);
  return img;
}

std::vector<Point> fork_positions(const LaneDag& dag) {
  std::vector<Point> out;
  for (const auto& v : dag.vertices()) {
    if (v.state == VertexState::Fork) out.push_back(v.position);
  }
  return out;
}

}  // namespace lanegraph
