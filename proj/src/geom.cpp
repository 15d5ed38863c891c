#include "lanegraph/geom.hpp"

#include <algorithm>
#include <string>

namespace lanegraph {

Polyline::Polyline(std::vector<Point> points, int id) : points_(std::move(points)), id_(id) {
  if (points_.size() < 2) {
    throw ParameterError("polyline " + std::to_string(id_) + " needs at least two points");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!is_finite(points_[i])) {
      throw ParameterError("polyline " + std::to_string(id_) + " has a non-finite point");
    }
    if (i > 0 && points_[i] == points_[i - 1]) {
      throw ParameterError("polyline " + std::to_string(id_) + " repeats point " +
                           std::to_string(i));
    }
  }
}

double Polyline::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) total += (points_[i] - points_[i - 1]).norm();
  return total;
}

RotatedRoi::RotatedRoi(Point c, Angle h, int height, int width)
    : center(c), heading(h), height_px(height), width_px(width) {
  if (height_px < 1 || width_px < 1) throw ParameterError("RoI extent must be at least 1x1");
  if (!is_finite(center)) throw ParameterError("RoI centre must be finite");
}

std::vector<ArcSample> densify_parameters(const std::vector<Point>& points, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw ParameterError("densify spacing must be positive, got " + std::to_string(spacing));
  }
  std::vector<ArcSample> samples;
  if (points.empty()) return samples;
  for (std::size_t s = 0; s + 1 < points.size(); ++s) {
    const double len = (points[s + 1] - points[s]).norm();
    // The small slack keeps densify idempotent when len/spacing is an integer
    // up to rounding.
    const auto pieces = std::max<long>(1, static_cast<long>(std::ceil(len / spacing - 1e-9)));
    for (long k = 0; k < pieces; ++k) samples.push_back({s, static_cast<double>(k) / pieces});
  }
  samples.push_back({points.size() >= 2 ? points.size() - 2 : 0, points.size() >= 2 ? 1.0 : 0.0});
  return samples;
}

std::vector<Point> densify_points(const std::vector<Point>& points, double spacing) {
  const auto params = densify_parameters(points, spacing);
  std::vector<Point> out;
  out.reserve(params.size());
  if (points.size() == 1) {
    out.push_back(points.front());
    return out;
  }
  for (const auto& [seg, t] : params) {
    if (t == 0.0) {
      out.push_back(points[seg]);
    } else if (t == 1.0) {
      out.push_back(points[seg + 1]);
    } else {
      out.push_back((1.0 - t) * points[seg] + t * points[seg + 1]);
    }
  }
  return out;
}

Polyline densify(const Polyline& p, double spacing) {
  return Polyline(densify_points(p.points(), spacing), p.id());
}

Angle heading_between(const Point& a, const Point& b) {
  const Point d = b - a;
  if (d.x() == 0.0 && d.y() == 0.0) throw ParameterError("heading between coincident points");
  return Angle(std::atan2(d.y(), d.x()));
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace lanegraph
