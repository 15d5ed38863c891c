#pragma once

// Pixel-space geometry.
//
// Coordinate convention used everywhere in the library: x is the column, y is the
// row, the origin is the top-left pixel centre and y grows downward. Angles are
// measured in that frame, so heading pi/2 points down the image.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "lanegraph/errors.hpp"

namespace lanegraph {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;
using Point = Point2<double>;

// Row-major dense raster; rows are y, columns are x.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealGrid = Grid<double>;

inline bool is_finite(const Point& p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

/// Planar angle kept in the canonical range (-pi, pi].
class Angle {
 public:
  constexpr Angle() = default;
  explicit Angle(double radians) : radians_(normalize(radians)) {}

  double radians() const { return radians_; }
  Point direction() const { return {std::cos(radians_), std::sin(radians_)}; }
  // Unit vector 90 degrees clockwise on screen (counter-clockwise in the y-down frame).
  Point normal() const { return {-std::sin(radians_), std::cos(radians_)}; }

  static double normalize(double radians) {
    double r = std::remainder(radians, 2.0 * std::numbers::pi);
    if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
    return r;
  }

  friend Angle operator+(Angle a, Angle b) { return Angle(a.radians_ + b.radians_); }
  friend Angle operator-(Angle a, Angle b) { return Angle(a.radians_ - b.radians_); }
  friend bool operator==(Angle a, Angle b) = default;

 private:
  double radians_ = 0.0;
};

// Absolute angular separation in [0, pi].
inline double angular_distance(Angle a, Angle b) { return std::abs((a - b).radians()); }

/// Ordered point list with at least two points and no repeated consecutive points.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Point> points, int id = 0);

  const std::vector<Point>& points() const { return points_; }
  int id() const { return id_; }
  void set_id(int id) { id_ = id; }
  std::size_t size() const { return points_.size(); }
  double length() const;

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  std::vector<Point> points_;
  int id_ = 0;
};

/// Rectangle of height_px rows by width_px columns centred on `center`, with the
/// local column axis along `heading`.
struct RotatedRoi {
  RotatedRoi(Point center, Angle heading, int height_px, int width_px);

  Point center;
  Angle heading;
  int height_px;
  int width_px;

  // Global position of cell (row, col); fractional indices are allowed.
  Point cell_to_global(double row, double col) const {
    const double u = col - 0.5 * (width_px - 1);
    const double v = row - 0.5 * (height_px - 1);
    return center + u * heading.direction() + v * heading.normal();
  }
  // Inverse of cell_to_global: returns (row, col).
  Point2<double> global_to_cell(const Point& p) const {
    const Point d = p - center;
    return {d.dot(heading.normal()) + 0.5 * (height_px - 1),
            d.dot(heading.direction()) + 0.5 * (width_px - 1)};
  }
};

// Location of a densified sample on the source polyline: segment index and
// interpolation parameter in [0, 1].
struct ArcSample {
  std::size_t segment;
  double t;
};

// Densification parameters: original vertices are kept and every segment is split
// uniformly into ceil(length / spacing) pieces.
std::vector<ArcSample> densify_parameters(const std::vector<Point>& points, double spacing);
std::vector<Point> densify_points(const std::vector<Point>& points, double spacing);
Polyline densify(const Polyline& p, double spacing);

Angle heading_between(const Point& a, const Point& b);

// Shortest distance from p to segment [a, b].
double point_segment_distance(const Point& p, const Point& a, const Point& b);

/// Bilinear interpolation with zero padding: neighbours outside the grid count as 0.
template <typename Derived>
double bilinear_at(const Eigen::ArrayBase<Derived>& grid, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const Eigen::Index x0 = static_cast<Eigen::Index>(fx);
  const Eigen::Index y0 = static_cast<Eigen::Index>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const Eigen::Index rows = grid.rows();
  const Eigen::Index cols = grid.cols();
  if (x0 >= 0 && y0 >= 0 && x0 + 1 < cols && y0 + 1 < rows) {
    const double v00 = grid(y0, x0);
    if (ax == 0.0 && ay == 0.0) return v00;
    return (1.0 - ay) * ((1.0 - ax) * v00 + ax * grid(y0, x0 + 1)) +
           ay * ((1.0 - ax) * grid(y0 + 1, x0) + ax * grid(y0 + 1, x0 + 1));
  }
  auto at = [&](Eigen::Index r, Eigen::Index c) -> double {
    if (r < 0 || c < 0 || r >= rows || c >= cols) return 0.0;
    return static_cast<double>(grid(r, c));
  };
  if (ax == 0.0 && ay == 0.0) return at(y0, x0);
  return (1.0 - ay) * ((1.0 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
         ay * ((1.0 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
}

/// Crops `roi` out of `grid`; cell (r, c) holds the interpolated value at
/// roi.cell_to_global(r, c).
template <typename Derived>
RealGrid sample_bilinear(const Eigen::ArrayBase<Derived>& grid, const RotatedRoi& roi) {
  RealGrid out(roi.height_px, roi.width_px);
  const Point origin = roi.cell_to_global(0.0, 0.0);
  const Point du = roi.heading.direction();
  const Point dv = roi.heading.normal();
  for (int r = 0; r < roi.height_px; ++r) {
    for (int c = 0; c < roi.width_px; ++c) {
      const Point p = origin + c * du + r * dv;
      out(r, c) = bilinear_at(grid, p.x(), p.y());
    }
  }
  return out;
}

}  // namespace lanegraph
