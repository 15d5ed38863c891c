#pragma once

// Polyline metrics: thresholded precision / recall / F1 over densified points,
// aggregated across images, and the one-prediction-per-boundary topology score.

#include <string>
#include <vector>

#include "lanegraph/geom.hpp"

namespace lanegraph {

using PolylineSet = std::vector<Polyline>;

/// Exact point-to-polyline distance queries, answered from a uniform bucket grid.
/// Distances beyond `reach` are reported as +inf.
class SegmentIndex {
 public:
  SegmentIndex(const PolylineSet& lines, double reach);

  double distance(const Point& p) const;
  // Calls fn(polyline index) once for each polyline within `reach` of p.
  template <typename Fn>
  void for_each_near(const Point& p, Fn&& fn) const;

 private:
  struct Segment {
    Point a, b;
    int line;
  };
  const std::vector<int>* bucket(const Point& p) const;

  double reach_;
  double cell_;
  long x0_ = 0, y0_ = 0, nx_ = 0, ny_ = 0;
  std::vector<Segment> segments_;
  std::vector<std::vector<int>> buckets_;
  int line_count_ = 0;
};

struct ThresholdScore {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct TopologyScore {
  int gt_count = 0;
  int correct_count = 0;
  double fraction = 1.0;
  // Per predicted polyline, the index of the GT polyline it was assigned to, or -1.
  std::vector<int> assignments;
};

struct ImageScore {
  std::vector<long> pred_hits;  // per threshold, predicted points near GT
  std::vector<long> gt_hits;    // per threshold, GT points near a prediction
  long pred_points = 0;
  long gt_points = 0;
  TopologyScore topology;
};

struct EvalOptions {
  std::vector<double> thresholds{2.0, 3.0, 5.0, 10.0};
  double topology_radius_px = 20.0;
  // Fraction of a GT boundary its single assigned prediction must cover (within the
  // topology radius) to count as correct. 0 disables the check.
  double min_cover = 0.0;
};

struct EvalReport {
  std::vector<ThresholdScore> scores;
  TopologyScore topology;  // totals; assignments left empty
  std::vector<ImageScore> images;
  bool precision_undefined = false;  // no predicted points at all
  bool recall_undefined = false;     // no GT points at all

  const ThresholdScore& at(double threshold) const;
};

// Per-image precision/recall terms and topology.
ImageScore score_image(const PolylineSet& preds, const PolylineSet& gts, const EvalOptions& opt);

/// Sums per-image terms over all images before dividing.
EvalReport evaluate(const std::vector<PolylineSet>& preds, const std::vector<PolylineSet>& gts,
                    const EvalOptions& opt = {});

EvalReport precision_recall(const std::vector<PolylineSet>& preds,
                            const std::vector<PolylineSet>& gts,
                            const std::vector<double>& thresholds = {2.0, 3.0, 5.0, 10.0});

TopologyScore topology_correctness(const PolylineSet& preds, const PolylineSet& gts,
                                   double radius_px = 20.0, double min_cover = 0.0);

// One header row and one data row, columns P@t..., R@t..., F1@t..., topology.
std::string report_csv(const EvalReport& report, const std::string& method = "ours");

template <typename Fn>
void SegmentIndex::for_each_near(const Point& p, Fn&& fn) const {
  const std::vector<int>* cell = bucket(p);
  if (cell == nullptr) return;
  std::vector<char> seen(static_cast<std::size_t>(line_count_), 0);
  for (int s : *cell) {
    const Segment& seg = segments_[static_cast<std::size_t>(s)];
    if (seen[seg.line]) continue;
    if (point_segment_distance(p, seg.a, seg.b) <= reach_) {
      seen[seg.line] = 1;
      fn(seg.line);
    }
  }
}

}  // namespace lanegraph
