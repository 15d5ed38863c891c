#include "lanegraph/headers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lanegraph/errors.hpp"

namespace lanegraph {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Cells whose logit is within this fraction of the maximum count as tied for the
// position argmax. Being relative, the rule is unchanged by rescaling the field.
constexpr double kNearMaxFraction = 0.02;
// While a fork branch still runs alongside the chain it left, cells this close to
// that chain's traced pixels are hidden from the position header.
constexpr double kIgnoreMaskPx = 3.0;

// State oracle geometry, in RoI cells.
constexpr int kRidgePad = 12;
constexpr double kOwnSearchPx = 8.0;
constexpr int kRunGapPx = 2;
constexpr int kJunctionPersistCols = 10;
constexpr double kJunctionBehind = 20.0;
constexpr double kJunctionAhead = 40.0;
constexpr double kBorderMarginPx = 16.0;

double log_sum_exp(const RealGrid& v) {
  const double m = v.maxCoeff();
  return m + std::log((v - m).exp().sum());
}

bool inside_with_margin(const DistanceField& f, const Point& p, double margin) {
  return p.x() >= margin && p.y() >= margin && p.x() <= f.width() - 1.0 - margin &&
         p.y() <= f.height() - 1.0 - margin;
}

void require_field(const HeaderContext& ctx) {
  if (ctx.field == nullptr || ctx.field->values.size() == 0) {
    throw DomainError("header context has no distance field");
  }
  if (ctx.claimed != nullptr && (ctx.claimed->rows() != ctx.field->height() ||
                                 ctx.claimed->cols() != ctx.field->width())) {
    throw ParameterError("claimed mask shape differs from the field");
  }
}

// Runs of set cells along one column, with gaps of up to kRunGapPx bridged.
int count_runs(const Grid<int>& labels, int own, int col) {
  int runs = 0;
  int last = -1000;
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    if (labels(r, col) != own) continue;
    if (r - last > kRunGapPx + 1) ++runs;
    last = static_cast<int>(r);
  }
  return runs;
}

}  // namespace

ClaimedMask::ClaimedMask(Eigen::Index rows, Eigen::Index cols)
    : labels_(Grid<int>::Zero(rows, cols)),
      times_(Grid<std::int64_t>::Constant(rows, cols, std::numeric_limits<std::int64_t>::max())) {}

void ClaimedMask::stamp_segment(const Point& a, const Point& b, int label, std::int64_t time) {
  if (label == kFree) throw ParameterError("cannot stamp with the free label");
  for_each_segment_pixel(a, b, [&](Eigen::Index r, Eigen::Index c) {
    if (r < 0 || c < 0 || r >= rows() || c >= cols()) return;
    if (labels_(r, c) != kFree) return;  // first writer keeps the pixel
    labels_(r, c) = label;
    times_(r, c) = time;
  });
}

bool ClaimedMask::claimed_by_other(const Point& p, double radius, int own, int ignore,
                                   std::int64_t horizon) const {
  const auto reach = static_cast<Eigen::Index>(std::ceil(radius));
  const Eigen::Index r0 = std::lround(p.y()), c0 = std::lround(p.x());
  const double r2 = radius * radius;
  for (Eigen::Index r = std::max<Eigen::Index>(0, r0 - reach);
       r <= std::min<Eigen::Index>(rows() - 1, r0 + reach); ++r) {
    for (Eigen::Index c = std::max<Eigen::Index>(0, c0 - reach);
         c <= std::min<Eigen::Index>(cols() - 1, c0 + reach); ++c) {
      const int l = label_at(r, c, horizon);
      if (l == kFree || l == own || l == ignore) continue;
      const double dx = c - p.x(), dy = r - p.y();
      if (dx * dx + dy * dy <= r2) return true;
    }
  }
  return false;
}

double ClaimedMask::distance_to_label(const Point& p, int label, double radius,
                                      std::int64_t horizon) const {
  const auto reach = static_cast<Eigen::Index>(std::ceil(radius));
  const Eigen::Index r0 = std::lround(p.y()), c0 = std::lround(p.x());
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = std::max<Eigen::Index>(0, r0 - reach);
       r <= std::min<Eigen::Index>(rows() - 1, r0 + reach); ++r) {
    for (Eigen::Index c = std::max<Eigen::Index>(0, c0 - reach);
         c <= std::min<Eigen::Index>(cols() - 1, c0 + reach); ++c) {
      if (label_at(r, c, horizon) != label) continue;
      best = std::min(best, std::hypot(c - p.x(), r - p.y()));
    }
  }
  return best <= radius ? best : std::numeric_limits<double>::infinity();
}

std::size_t ClaimedMask::claimed_count(std::int64_t horizon) const {
  return static_cast<std::size_t>((labels_ != kFree && times_ < horizon).count());
}

void HeaderConfig::validate() const {
  if (step_px < 1 || roi_h < 1 || roi_w < 1) {
    throw ParameterError("step and RoI extents must be positive");
  }
  if (step_px >= std::min(roi_h, roi_w)) {
    throw ParameterError("step_px (" + std::to_string(step_px) +
                         ") must be smaller than both RoI extents");
  }
  if (angle_samples < 3) throw ParameterError("angle_samples must be at least 3");
  if (!(fork_sep_min_rad >= 0.0) || !(merge_radius_px > 0.0)) {
    throw ParameterError("fork_sep_min_rad must be >= 0 and merge_radius_px > 0");
  }
  if (!(ridge_threshold > 0.0 && ridge_threshold < kFieldMax)) {
    throw ParameterError("ridge_threshold must lie in (0, 10)");
  }
}

RotatedRoi DistanceFieldOracle::roi_for(const HeaderContext& ctx, Angle angle) const {
  const Point center = ctx.parent_position + config().step_px * angle.direction();
  return RotatedRoi(center, angle, config().roi_h, config().roi_w);
}

DistanceFieldOracle::Candidates DistanceFieldOracle::direction_candidates(
    const HeaderContext& ctx) const {
  require_field(ctx);
  const int n = config().angle_samples;
  const double spacing = std::numbers::pi / (n - 1);
  const bool exclude = ctx.parent_state == VertexState::Fork && ctx.consumed_branch.has_value();
  const auto& grid = ctx.field->values;
  Candidates out;
  out.angles.reserve(n);
  out.scores.reserve(n);
  for (int k = 0; k < n; ++k) {
    const Angle a = ctx.parent_angle + Angle(-0.5 * std::numbers::pi + k * spacing);
    if (exclude && angular_distance(a, *ctx.consumed_branch) <= config().fork_sep_min_rad) continue;
    const Point d = a.direction();
    double sum = 0.0;
    // Only samples inside the image count; a ray that leaves early is judged on the
    // part it saw instead of being diluted by zeros.
    int seen = 0;
    for (int t = 1; t <= config().step_px; ++t) {
      const Point p = ctx.parent_position + t * d;
      if (!ctx.field->contains(p)) continue;
      sum += bilinear_at(grid, p.x(), p.y());
      ++seen;
    }
    out.angles.push_back(a);
    out.scores.push_back(seen > 0 ? sum / seen : 0.0);
  }
  return out;
}

DirectionPrediction DistanceFieldOracle::predict_direction(const HeaderContext& ctx) const {
  const Candidates c = direction_candidates(ctx);
  double total = 0.0, top = 0.0;
  for (double r : c.scores) {
    total += r;
    top = std::max(top, r);
  }
  // Near-ties go to the smallest turn, so a trace keeps to the straighter of two
  // ridges that have not separated yet.
  std::size_t best = 0;
  double best_dev = kNegInf;
  for (std::size_t k = 0; k < c.scores.size(); ++k) {
    if (c.scores[k] < top * (1.0 - kNearMaxFraction)) continue;
    const double dev = angular_distance(c.angles[k], ctx.parent_angle);
    if (best_dev == kNegInf || dev < best_dev) {
      best = k;
      best_dev = dev;
    }
  }
  DirectionPrediction out;
  if (c.scores.empty() || !(total > 0.0)) {
    out.angle = ctx.parent_angle;
    out.log_prob = kNegInf;
    out.lost_track = true;
    return out;
  }
  out.angle = c.angles[best];
  out.log_prob = std::log(c.scores[best] / total);
  return out;
}

double DistanceFieldOracle::direction_log_prob(const HeaderContext& ctx, Angle angle) const {
  // The distribution is discrete over the candidate grid; an angle scores the
  // probability of the grid bin it falls in.
  const double spacing = std::numbers::pi / (config().angle_samples - 1);
  const double offset = (angle - ctx.parent_angle).radians() + 0.5 * std::numbers::pi;
  const long k = std::lround(offset / spacing);
  if (k < 0 || k >= config().angle_samples) return kNegInf;
  const Angle bin = ctx.parent_angle + Angle(-0.5 * std::numbers::pi + k * spacing);
  const Candidates c = direction_candidates(ctx);
  double total = 0.0;
  double hit = -1.0;
  for (std::size_t i = 0; i < c.angles.size(); ++i) {
    total += c.scores[i];
    if (c.angles[i] == bin) hit = c.scores[i];
  }
  if (!(hit > 0.0) || !(total > 0.0)) return kNegInf;
  return std::log(hit / total);
}

RealGrid DistanceFieldOracle::position_logits(const HeaderContext& ctx, Angle angle) const {
  require_field(ctx);
  const RotatedRoi roi = roi_for(ctx, angle);
  RealGrid logits = sample_bilinear(ctx.field->values, roi);
  if (ctx.claimed == nullptr || ctx.ignore_label == ClaimedMask::kFree) return logits;

  // Hide the cells next to the chain this branch is leaving. Pixels of that chain
  // are collected from the RoI's bounding box once.
  const Eigen::Index rows = ctx.claimed->rows(), cols = ctx.claimed->cols();
  double x_lo = roi.center.x(), x_hi = x_lo, y_lo = roi.center.y(), y_hi = y_lo;
  for (double r : {0.0, roi.height_px - 1.0}) {
    for (double c : {0.0, roi.width_px - 1.0}) {
      const Point g = roi.cell_to_global(r, c);
      x_lo = std::min(x_lo, g.x());
      x_hi = std::max(x_hi, g.x());
      y_lo = std::min(y_lo, g.y());
      y_hi = std::max(y_hi, g.y());
    }
  }
  const auto r_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(y_lo - kIgnoreMaskPx)));
  const auto r_hi = std::min<Eigen::Index>(rows - 1, static_cast<Eigen::Index>(std::ceil(y_hi + kIgnoreMaskPx)));
  const auto c_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(x_lo - kIgnoreMaskPx)));
  const auto c_hi = std::min<Eigen::Index>(cols - 1, static_cast<Eigen::Index>(std::ceil(x_hi + kIgnoreMaskPx)));
  std::vector<Point> left_behind;
  for (Eigen::Index r = r_lo; r <= r_hi; ++r) {
    for (Eigen::Index c = c_lo; c <= c_hi; ++c) {
      if (ctx.claimed->label_at(r, c, ctx.horizon) == ctx.ignore_label) {
        left_behind.emplace_back(static_cast<double>(c), static_cast<double>(r));
      }
    }
  }
  if (left_behind.empty()) return logits;
  const double reach2 = kIgnoreMaskPx * kIgnoreMaskPx;
  for (const Point& q : left_behind) {
    const Point2<double> cell = roi.global_to_cell(q);
    const auto r0 = static_cast<int>(std::floor(cell.x() - kIgnoreMaskPx));
    const auto r1 = static_cast<int>(std::ceil(cell.x() + kIgnoreMaskPx));
    const auto c0 = static_cast<int>(std::floor(cell.y() - kIgnoreMaskPx));
    const auto c1 = static_cast<int>(std::ceil(cell.y() + kIgnoreMaskPx));
    for (int r = std::max(0, r0); r <= std::min(roi.height_px - 1, r1); ++r) {
      for (int c = std::max(0, c0); c <= std::min(roi.width_px - 1, c1); ++c) {
        if ((roi.cell_to_global(r, c) - q).squaredNorm() <= reach2) logits(r, c) = 0.0;
      }
    }
  }
  return logits;
}

PositionPrediction DistanceFieldOracle::predict_position(const HeaderContext& ctx,
                                                         Angle angle) const {
  const RotatedRoi roi = roi_for(ctx, angle);
  const RealGrid logits = position_logits(ctx, angle);

  PositionPrediction out;
  // The boundary has left the image once the point a full step ahead is off the field.
  if (!ctx.field->contains(roi.center)) {
    out.exit_image = true;
    out.position = roi.center;
    out.log_prob = kNegInf;
    return out;
  }

  const double top = logits.maxCoeff();
  const double floor_value = top * (1.0 - kNearMaxFraction);
  const double cr = 0.5 * (roi.height_px - 1), cc = 0.5 * (roi.width_px - 1);
  int best_r = -1, best_c = -1;
  double best_d2 = 0.0;
  for (int r = 0; r < roi.height_px; ++r) {
    for (int c = 0; c < roi.width_px; ++c) {
      if (logits(r, c) < floor_value) continue;
      const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (best_r < 0 || d2 < best_d2) {
        best_r = r;
        best_c = c;
        best_d2 = d2;
      }
    }
  }
  out.position = roi.cell_to_global(best_r, best_c);
  out.log_prob = logits(best_r, best_c) - log_sum_exp(logits);
  return out;
}

double DistanceFieldOracle::position_log_prob(const HeaderContext& ctx, Angle angle,
                                              const Point& position) const {
  const RotatedRoi roi = roi_for(ctx, angle);
  const Point2<double> cell = roi.global_to_cell(position);
  const long r = std::lround(cell.x()), c = std::lround(cell.y());
  if (r < 0 || c < 0 || r >= roi.height_px || c >= roi.width_px) return kNegInf;
  const RealGrid logits = position_logits(ctx, angle);
  return logits(r, c) - log_sum_exp(logits);
}

RidgeReading DistanceFieldOracle::read_ridge(const HeaderContext& ctx, Angle angle) const {
  require_field(ctx);
  const RotatedRoi roi = roi_for(ctx, angle);
  const int h = roi.height_px, w = roi.width_px;
  RidgeReading out;
  if (ctx.claimed != nullptr) {
    out.merge = ctx.claimed->claimed_by_other(roi.center, config().merge_radius_px, ctx.own_label,
                                              ctx.ignore_label, ctx.horizon);
  }

  // Thin a padded crop so the skeleton is not shortened at the RoI edges, then keep
  // the inner window.
  const RotatedRoi padded(roi.center, angle, h + 2 * kRidgePad, w + 2 * kRidgePad);
  const BinaryMask band =
      (sample_bilinear(ctx.field->values, padded) >= config().ridge_threshold).cast<std::uint8_t>();
  const BinaryMask skeleton = skeletonize(band).block(kRidgePad, kRidgePad, h, w);
  Grid<int> labels;
  label_components(skeleton, labels);

  const double cr = 0.5 * (h - 1), cc = 0.5 * (w - 1);
  int own = 0;
  double best = kOwnSearchPx * kOwnSearchPx;
  const int reach = static_cast<int>(std::ceil(kOwnSearchPx)) + 1;
  for (int r = std::max(0, static_cast<int>(cr) - reach); r <= std::min(h - 1, static_cast<int>(cr) + reach + 1); ++r) {
    for (int c = std::max(0, static_cast<int>(cc) - reach); c <= std::min(w - 1, static_cast<int>(cc) + reach + 1); ++c) {
      if (!labels(r, c)) continue;
      const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (d2 < best || (d2 == best && own == 0)) {
        best = d2;
        own = labels(r, c);
      }
    }
  }
  if (own == 0) return out;
  out.found = true;

  out.far_branches = count_runs(labels, own, w - 1);
  if (out.far_branches >= 2) {
    int c = w - 1;
    while (c > 0 && count_runs(labels, own, c - 1) >= 2) --c;
    // A fork is one ridge splitting in two, so the own component has to enter the RoI
    // as a single run. Two converging ridges joined by a thinning bridge (a merge seen
    // from upstream) enter as two.
    const bool single_stem = count_runs(labels, own, 0) <= 1;
    if (w - c >= kJunctionPersistCols && single_stem) out.junction_col = c;
  }
  if (out.far_branches == 0) {
    bool touches_side = false;
    for (int c = 0; c < w && !touches_side; ++c) {
      touches_side = labels(0, c) == own || labels(h - 1, c) == own;
    }
    const Point far_mid = roi.cell_to_global(cr, w - 1);
    out.ridge_ends = !touches_side && inside_with_margin(*ctx.field, far_mid, kBorderMarginPx);
  }
  return out;
}

StatePrediction DistanceFieldOracle::predict_state(const HeaderContext& ctx, Angle angle) const {
  const RidgeReading ridge = read_ridge(ctx, angle);
  const RotatedRoi roi = roi_for(ctx, angle);
  const double cc = 0.5 * (roi.width_px - 1);

  VertexState state = VertexState::Normal;
  const bool junction_here = ridge.junction_col >= 0 && ridge.junction_col > cc - kJunctionBehind &&
                             ridge.junction_col <= cc + kJunctionAhead;
  if (ridge.merge) {
    state = VertexState::Terminate;
  } else if (!ridge.found) {
    // Nothing to follow. Near the border this is the boundary leaving the image.
    if (inside_with_margin(*ctx.field, roi.center, kFieldReachPx)) state = VertexState::Terminate;
  } else if (junction_here && ctx.parent_state != VertexState::Fork) {
    state = VertexState::Fork;
  } else if (ridge.ridge_ends) {
    state = VertexState::Terminate;
  }

  StatePrediction out;
  out.state = state;
  for (int k = 0; k < kStateCount; ++k) {
    out.log_probs[k] = std::log(k == static_cast<int>(state) ? 1.0 - 2.0 * kStateEpsilon
                                                             : kStateEpsilon);
  }
  return out;
}

}  // namespace lanegraph
