#include "lanegraph/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace lanegraph {
namespace {

constexpr double kInf = 1e20;

// One-dimensional squared distance transform (lower envelope of parabolas).
// `f` holds sampled costs; the result overwrites `d`.
void squared_dt_1d(const std::vector<double>& f, std::vector<double>& d,
                   std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    for (;;) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;  // z[0] is -inf, so this stops at k == 0
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

RealGrid exact_distance_transform(const BinaryMask& mask) {
  const Eigen::Index rows = mask.rows();
  const Eigen::Index cols = mask.cols();
  if (rows == 0 || cols == 0 || (mask != 0).count() == 0) {
    throw DomainError("distance transform of an empty mask");
  }
  RealGrid sq(rows, cols);
  const Eigen::Index longest = std::max(rows, cols);
  std::vector<double> f(longest), d(longest), z(longest + 1);
  std::vector<int> v(longest);

  // Columns first. A column without set pixels stays at kInf.
  f.resize(rows);
  d.resize(rows);
  for (Eigen::Index c = 0; c < cols; ++c) {
    bool any = false;
    for (Eigen::Index r = 0; r < rows; ++r) {
      f[r] = mask(r, c) ? 0.0 : kInf;
      any = any || mask(r, c);
    }
    if (!any) {
      sq.col(c).setConstant(kInf);
      continue;
    }
    squared_dt_1d(f, d, v, z);
    for (Eigen::Index r = 0; r < rows; ++r) sq(r, c) = d[r];
  }
  f.resize(cols);
  d.resize(cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) f[c] = sq(r, c);
    squared_dt_1d(f, d, v, z);
    for (Eigen::Index c = 0; c < cols; ++c) sq(r, c) = d[c];
  }
  return sq.sqrt();
}

void draw_segment(BinaryMask& mask, const Point& a, const Point& b) {
  for_each_segment_pixel(a, b, [&](Eigen::Index r, Eigen::Index c) {
    if (r >= 0 && c >= 0 && r < mask.rows() && c < mask.cols()) mask(r, c) = 1;
  });
}

BinaryMask rasterize_polylines(std::span<const Polyline> polylines, Eigen::Index rows,
                               Eigen::Index cols) {
  BinaryMask mask = BinaryMask::Zero(rows, cols);
  for (const auto& line : polylines) {
    const auto pts = densify_points(line.points(), 1.0);
    for (std::size_t i = 1; i < pts.size(); ++i) draw_segment(mask, pts[i - 1], pts[i]);
  }
  return mask;
}

DistanceField inverse_threshold_field(const BinaryMask& boundary) {
  const RealGrid dist = exact_distance_transform(boundary);
  DistanceField field;
  field.values = (kBoundaryValue * (1.0 - dist / kFieldReachPx)).max(0.0).min(kFieldMax);
  return field;
}

DistanceField inverse_threshold_dt(std::span<const Polyline> polylines, Eigen::Index rows,
                                   Eigen::Index cols) {
  if (polylines.empty()) throw DomainError("inverse DT needs at least one polyline");
  const BinaryMask boundary = rasterize_polylines(polylines, rows, cols);
  if ((boundary != 0).count() == 0) {
    throw DomainError("no polyline falls inside the " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " raster");
  }
  return inverse_threshold_field(boundary);
}

DistanceField field_from_intensity(const IntensityRaster& raster, double intensity_threshold) {
  const BinaryMask bright = (raster.values >= intensity_threshold).cast<std::uint8_t>();
  if ((bright != 0).count() == 0) {
    DistanceField empty;
    empty.values = RealGrid::Zero(raster.height(), raster.width());
    return empty;
  }
  return inverse_threshold_field(bright);
}

BinaryMask binarize(const DistanceField& field, double threshold) {
  if (!(threshold > 0.0 && threshold < kFieldMax)) {
    throw ParameterError("binarize threshold must lie in (0, 10), got " +
                         std::to_string(threshold));
  }
  return (field.values >= threshold).cast<std::uint8_t>();
}

int neighbor_count(const BinaryMask& mask, Eigen::Index r, Eigen::Index c) {
  int n = 0;
  for (Eigen::Index dr = -1; dr <= 1; ++dr) {
    for (Eigen::Index dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const Eigen::Index rr = r + dr, cc = c + dc;
      if (rr >= 0 && cc >= 0 && rr < mask.rows() && cc < mask.cols() && mask(rr, cc)) ++n;
    }
  }
  return n;
}

BinaryMask skeletonize(BinaryMask mask) {
  const Eigen::Index rows = mask.rows();
  const Eigen::Index cols = mask.cols();
  // Work on a copy with a one-pixel unset frame so neighbour reads need no checks.
  const Eigen::Index stride = cols + 2;
  std::vector<std::uint8_t> img(static_cast<std::size_t>((rows + 2) * stride), 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) img[(r + 1) * stride + c + 1] = mask(r, c) != 0;
  }
  // Neighbour order P2..P9: N, NE, E, SE, S, SW, W, NW; bit k holds P(k+2).
  const std::array<Eigen::Index, 8> offset = {-stride, -stride + 1, 1,  stride + 1,
                                              stride,  stride - 1,  -1, -stride - 1};
  static const auto table = [] {
    std::array<std::array<bool, 256>, 2> t{};
    for (int code = 0; code < 256; ++code) {
      int p[8], b = 0, a = 0;
      for (int k = 0; k < 8; ++k) b += p[k] = (code >> k) & 1;
      for (int k = 0; k < 8; ++k) a += p[k] == 0 && p[(k + 1) % 8] == 1;
      const bool shape = b >= 2 && b <= 6 && a == 1;
      t[0][code] = shape && p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0;
      t[1][code] = shape && p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0;
    }
    return t;
  }();
  auto code_at = [&](Eigen::Index i) {
    int code = 0;
    for (int k = 0; k < 8; ++k) code |= img[i + offset[k]] << k;
    return code;
  };

  // Only contour pixels (set, with an unset neighbour) can be deleted, so the
  // candidate list is the contour plus set neighbours of freshly deleted pixels.
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index r = 1; r <= rows; ++r) {
    for (Eigen::Index i = r * stride + 1; i <= r * stride + cols; ++i) {
      if (img[i] && code_at(i) != 255) candidates.push_back(i);
    }
  }
  std::vector<std::uint8_t> queued(img.size(), 0);
  std::vector<Eigen::Index> doomed, next;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (Eigen::Index i : candidates) {
        if (img[i] && table[pass][code_at(i)]) doomed.push_back(i);
      }
      if (doomed.empty()) continue;
      changed = true;
      for (Eigen::Index i : doomed) img[i] = 0;
      next.clear();
      for (Eigen::Index i : candidates) {
        if (img[i] && !queued[i]) {
          queued[i] = 1;
          next.push_back(i);
        }
      }
      for (Eigen::Index i : doomed) {
        for (Eigen::Index o : offset) {
          if (img[i + o] && !queued[i + o]) {
            queued[i + o] = 1;
            next.push_back(i + o);
          }
        }
      }
      for (Eigen::Index i : next) queued[i] = 0;
      candidates.swap(next);
    }
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = img[(r + 1) * stride + c + 1];
  }
  return mask;
}

std::vector<Point> skeleton_endpoints(const BinaryMask& skeleton) {
  std::vector<Point> out;
  for (Eigen::Index r = 0; r < skeleton.rows(); ++r) {
    for (Eigen::Index c = 0; c < skeleton.cols(); ++c) {
      if (skeleton(r, c) && neighbor_count(skeleton, r, c) == 1) {
        out.emplace_back(static_cast<double>(c), static_cast<double>(r));
      }
    }
  }
  return out;
}

int label_components(const BinaryMask& mask, Grid<int>& labels) {
  const Eigen::Index rows = mask.rows(), cols = mask.cols();
  labels = Grid<int>::Zero(rows, cols);
  int next = 0;
  std::vector<Eigen::Index> stack;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!mask(r, c) || labels(r, c)) continue;
      ++next;
      labels(r, c) = next;
      stack.push_back(r * cols + c);
      while (!stack.empty()) {
        const Eigen::Index idx = stack.back();
        stack.pop_back();
        const Eigen::Index pr = idx / cols, pc = idx % cols;
        for (Eigen::Index dr = -1; dr <= 1; ++dr) {
          for (Eigen::Index dc = -1; dc <= 1; ++dc) {
            const Eigen::Index rr = pr + dr, cc = pc + dc;
            if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
            if (mask(rr, cc) && !labels(rr, cc)) {
              labels(rr, cc) = next;
              stack.push_back(rr * cols + cc);
            }
          }
        }
      }
    }
  }
  return next;
}

}  // namespace lanegraph
