#include "lanegraph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "lanegraph/errors.hpp"

namespace lanegraph {
namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::vector<std::vector<Point>> densified(const PolylineSet& lines) {
  std::vector<std::vector<Point>> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(densify_points(l.points(), 1.0));
  return out;
}

// For every point of `from`, its distance to `to` (capped at the index reach).
void count_hits(const std::vector<std::vector<Point>>& from, const SegmentIndex& to,
                const std::vector<double>& thresholds, std::vector<long>& hits, long& total) {
  hits.assign(thresholds.size(), 0);
  total = 0;
  for (const auto& pts : from) {
    for (const Point& p : pts) {
      ++total;
      const double d = to.distance(p);
      for (std::size_t k = 0; k < thresholds.size(); ++k) hits[k] += d <= thresholds[k];
    }
  }
}

}  // namespace

SegmentIndex::SegmentIndex(const PolylineSet& lines, double reach)
    : reach_(reach), cell_(std::max(reach, 1.0)), line_count_(static_cast<int>(lines.size())) {
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& pts = lines[i].points();
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      segments_.push_back({pts[k], pts[k + 1], static_cast<int>(i)});
    }
    for (const auto& p : pts) {
      xmin = std::min(xmin, p.x());
      xmax = std::max(xmax, p.x());
      ymin = std::min(ymin, p.y());
      ymax = std::max(ymax, p.y());
    }
  }
  if (segments_.empty()) return;
  x0_ = static_cast<long>(std::floor((xmin - reach_) / cell_));
  y0_ = static_cast<long>(std::floor((ymin - reach_) / cell_));
  nx_ = static_cast<long>(std::floor((xmax + reach_) / cell_)) - x0_ + 1;
  ny_ = static_cast<long>(std::floor((ymax + reach_) / cell_)) - y0_ + 1;
  buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
  for (std::size_t s = 0; s < segments_.size(); ++s) {
    const Segment& g = segments_[s];
    const long cx0 = static_cast<long>(std::floor((std::min(g.a.x(), g.b.x()) - reach_) / cell_)) - x0_;
    const long cx1 = static_cast<long>(std::floor((std::max(g.a.x(), g.b.x()) + reach_) / cell_)) - x0_;
    const long cy0 = static_cast<long>(std::floor((std::min(g.a.y(), g.b.y()) - reach_) / cell_)) - y0_;
    const long cy1 = static_cast<long>(std::floor((std::max(g.a.y(), g.b.y()) + reach_) / cell_)) - y0_;
    for (long cy = cy0; cy <= cy1; ++cy) {
      for (long cx = cx0; cx <= cx1; ++cx) {
        buckets_[static_cast<std::size_t>(cy * nx_ + cx)].push_back(static_cast<int>(s));
      }
    }
  }
}

const std::vector<int>* SegmentIndex::bucket(const Point& p) const {
  if (segments_.empty()) return nullptr;
  const long cx = static_cast<long>(std::floor(p.x() / cell_)) - x0_;
  const long cy = static_cast<long>(std::floor(p.y() / cell_)) - y0_;
  if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) return nullptr;
  return &buckets_[static_cast<std::size_t>(cy * nx_ + cx)];
}

double SegmentIndex::distance(const Point& p) const {
  const std::vector<int>* cell = bucket(p);
  double best = std::numeric_limits<double>::infinity();
  if (cell == nullptr) return best;
  for (int s : *cell) {
    const Segment& g = segments_[static_cast<std::size_t>(s)];
    best = std::min(best, point_segment_distance(p, g.a, g.b));
  }
  return best <= reach_ ? best : std::numeric_limits<double>::infinity();
}

const ThresholdScore& EvalReport::at(double threshold) const {
  for (const auto& s : scores) {
    if (s.threshold == threshold) return s;
  }
  throw ParameterError("no score at threshold " + std::to_string(threshold));
}

TopologyScore topology_correctness(const PolylineSet& preds, const PolylineSet& gts,
                                   double radius_px, double min_cover) {
  TopologyScore out;
  out.gt_count = static_cast<int>(gts.size());
  out.assignments.assign(preds.size(), -1);
  if (gts.empty()) return out;
  const SegmentIndex gt_index(gts, radius_px);
  std::vector<int> assigned_count(gts.size(), 0);
  std::vector<int> counts(gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const Point& p : densify_points(preds[i].points(), 1.0)) {
      gt_index.for_each_near(p, [&](int g) { ++counts[g]; });
    }
    int best = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (counts[g] > 0 && (best < 0 || counts[g] > counts[best])) best = static_cast<int>(g);
    }
    out.assignments[i] = best;
    if (best >= 0) ++assigned_count[best];
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (assigned_count[g] != 1) continue;
    if (min_cover > 0.0) {
      const auto it = std::find(out.assignments.begin(), out.assignments.end(), static_cast<int>(g));
      const SegmentIndex pred_index({preds[static_cast<std::size_t>(it - out.assignments.begin())]},
                                    radius_px);
      const auto pts = densify_points(gts[g].points(), 1.0);
      const auto near = std::count_if(pts.begin(), pts.end(), [&](const Point& p) {
        return std::isfinite(pred_index.distance(p));
      });
      if (static_cast<double>(near) < min_cover * static_cast<double>(pts.size())) continue;
    }
    ++out.correct_count;
  }
  out.fraction = static_cast<double>(out.correct_count) / out.gt_count;
  return out;
}

ImageScore score_image(const PolylineSet& preds, const PolylineSet& gts, const EvalOptions& opt) {
  const double reach = *std::max_element(opt.thresholds.begin(), opt.thresholds.end());
  ImageScore s;
  count_hits(densified(preds), SegmentIndex(gts, reach), opt.thresholds, s.pred_hits, s.pred_points);
  count_hits(densified(gts), SegmentIndex(preds, reach), opt.thresholds, s.gt_hits, s.gt_points);
  s.topology = topology_correctness(preds, gts, opt.topology_radius_px, opt.min_cover);
  return s;
}

EvalReport evaluate(const std::vector<PolylineSet>& preds, const std::vector<PolylineSet>& gts,
                    const EvalOptions& opt) {
  if (preds.size() != gts.size()) throw ParameterError("prediction and GT image lists differ in length");
  if (opt.thresholds.empty()) throw ParameterError("at least one threshold is required");
  for (double t : opt.thresholds) {
    if (!(t >= 0.0)) throw ParameterError("thresholds must be non-negative");
  }
  EvalReport report;
  const std::size_t nt = opt.thresholds.size();
  std::vector<long> pred_hits(nt, 0), gt_hits(nt, 0);
  long pred_points = 0, gt_points = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ImageScore s = score_image(preds[i], gts[i], opt);
    for (std::size_t k = 0; k < nt; ++k) {
      pred_hits[k] += s.pred_hits[k];
      gt_hits[k] += s.gt_hits[k];
    }
    pred_points += s.pred_points;
    gt_points += s.gt_points;
    report.topology.gt_count += s.topology.gt_count;
    report.topology.correct_count += s.topology.correct_count;
    report.images.push_back(std::move(s));
  }
  report.precision_undefined = pred_points == 0;
  report.recall_undefined = gt_points == 0;
  for (std::size_t k = 0; k < nt; ++k) {
    ThresholdScore t;
    t.threshold = opt.thresholds[k];
    t.precision = pred_points ? static_cast<double>(pred_hits[k]) / pred_points : 0.0;
    t.recall = gt_points ? static_cast<double>(gt_hits[k]) / gt_points : 0.0;
    t.f1 = f1_of(t.precision, t.recall);
    report.scores.push_back(t);
  }
  report.topology.fraction = report.topology.gt_count
                                 ? static_cast<double>(report.topology.correct_count) /
                                       report.topology.gt_count
                                 : 1.0;
  return report;
}

EvalReport precision_recall(const std::vector<PolylineSet>& preds,
                            const std::vector<PolylineSet>& gts,
                            const std::vector<double>& thresholds) {
  EvalOptions opt;
  opt.thresholds = thresholds;
  return evaluate(preds, gts, opt);
}

std::string report_csv(const EvalReport& report, const std::string& method) {
  std::string head = "method", row = method;
  char buf[64];
  auto add = [&](const char* prefix, double t, double v) {
    std::snprintf(buf, sizeof buf, ",%s@%g", prefix, t);
    head += buf;
    std::snprintf(buf, sizeof buf, ",%.1f", 100.0 * v);
    row += buf;
  };
  for (const auto& s : report.scores) add("P", s.threshold, s.precision);
  for (const auto& s : report.scores) add("R", s.threshold, s.recall);
  for (const auto& s : report.scores) add("F1", s.threshold, s.f1);
  std::snprintf(buf, sizeof buf, ",%.1f", 100.0 * report.topology.fraction);
  return head + ",topology\n" + row + buf + "\n";
}

}  // namespace lanegraph
