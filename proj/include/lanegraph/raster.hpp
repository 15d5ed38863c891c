#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <vector>

#include "lanegraph/geom.hpp"

namespace lanegraph {

using BinaryMask = Grid<std::uint8_t>;

/// Bird's-eye-view intensity image, values in [0, 1].
struct IntensityRaster {
  RealGrid values;
  double resolution_m_per_px = 0.05;

  Eigen::Index height() const { return values.rows(); }
  Eigen::Index width() const { return values.cols(); }
};

/// Thresholded inverse distance transform: 8 on boundaries, decaying linearly to 0
/// at kFieldReachPx, always inside [0, kFieldMax].
struct DistanceField {
  RealGrid values;

  Eigen::Index height() const { return values.rows(); }
  Eigen::Index width() const { return values.cols(); }
  bool contains(const Point& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width() - 1.0 && p.y() <= height() - 1.0;
  }
};

inline constexpr double kBoundaryValue = 8.0;
inline constexpr double kFieldMax = 10.0;
inline constexpr double kFieldReachPx = 32.0;

// Decay profile f(d) = clamp(8 (1 - d / 32), 0, 10).
inline double inverse_dt_value(double distance_px) {
  const double v = kBoundaryValue * (1.0 - distance_px / kFieldReachPx);
  return v < 0.0 ? 0.0 : (v > kFieldMax ? kFieldMax : v);
}

/// Euclidean distance from every cell to the nearest set cell, exact.
/// Throws DomainError for an empty mask.
RealGrid exact_distance_transform(const BinaryMask& mask);

// 1-px Bresenham strokes of the polylines densified at 1 px; off-grid pixels are dropped.
BinaryMask rasterize_polylines(std::span<const Polyline> polylines, Eigen::Index rows,
                               Eigen::Index cols);
void draw_segment(BinaryMask& mask, const Point& a, const Point& b);

// Bresenham walk between the rounded endpoints, calling fn(row, col) for every pixel
// including both ends. No clipping is done here.
template <typename Fn>
void for_each_segment_pixel(const Point& a, const Point& b, Fn&& fn) {
  long x0 = std::lround(a.x()), y0 = std::lround(a.y());
  const long x1 = std::lround(b.x()), y1 = std::lround(b.y());
  const long dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const long dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  for (;;) {
    fn(static_cast<Eigen::Index>(y0), static_cast<Eigen::Index>(x0));
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

DistanceField inverse_threshold_field(const BinaryMask& boundary);
DistanceField inverse_threshold_dt(std::span<const Polyline> polylines, Eigen::Index rows,
                                   Eigen::Index cols);

// Boundary estimate from an intensity raster: cells at or above `intensity_threshold`
// are treated as painted boundary. This is the non-learned stand-in for a DT predictor.
DistanceField field_from_intensity(const IntensityRaster& raster,
                                   double intensity_threshold = 0.6);

/// Cells with value >= threshold; threshold must lie in (0, 10).
BinaryMask binarize(const DistanceField& field, double threshold);

/// Zhang-Suen two-subiteration thinning. Pixels outside the mask count as unset.
BinaryMask skeletonize(BinaryMask mask);

// Number of set 8-neighbours of (r, c).
int neighbor_count(const BinaryMask& mask, Eigen::Index r, Eigen::Index c);

/// Skeleton pixels with exactly one set 8-neighbour, as (x, y) points ordered by (y, x).
std::vector<Point> skeleton_endpoints(const BinaryMask& skeleton);

// 8-connected component labels (0 = background, 1..n); returns n.
int label_components(const BinaryMask& mask, Grid<int>& labels);

}  // namespace lanegraph
