#include <gtest/gtest.h>

#include "lanegraph/eval.hpp"

using namespace lanegraph;

namespace {

const PolylineSet kGt{Polyline({Point(0, 50), Point(100, 50)}), Polyline({Point(0, 120), Point(100, 130)})};

}  // namespace

TEST(Eval, ExactPredictionScoresOne) {
  const EvalReport r = precision_recall({kGt}, {kGt});
  for (const auto& s : r.scores) {
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
    EXPECT_EQ(s.f1, 1.0);
  }
  EXPECT_EQ(r.topology.fraction, 1.0);
}

TEST(Eval, FourPixelOffset) {
  const PolylineSet gt{Polyline({Point(0, 0), Point(200, 0)})};
  const PolylineSet pred{Polyline({Point(0, 4), Point(200, 4)})};
  const EvalReport r = precision_recall({pred}, {gt});
  EXPECT_EQ(r.at(3).precision, 0.0);
  EXPECT_EQ(r.at(5).precision, 1.0);
  EXPECT_EQ(r.at(2).f1, 0.0);
  EXPECT_THROW(r.at(4), ParameterError);
}

TEST(Eval, PointsAreCountedAcrossImages) {
  // 101 matching points in one image, 51 missing ones in the other.
  const PolylineSet a{Polyline({Point(0, 0), Point(100, 0)})};
  const PolylineSet b{Polyline({Point(0, 0), Point(50, 0)})};
  const PolylineSet far{Polyline({Point(0, 90), Point(50, 90)})};
  const EvalReport r = precision_recall({a, far}, {a, b});
  EXPECT_NEAR(r.at(2).precision, 101.0 / 152.0, 1e-12);
  EXPECT_NEAR(r.at(2).recall, 101.0 / 152.0, 1e-12);
}

TEST(Eval, MonotoneInThresholdAndSwapSymmetric) {
  const PolylineSet pred{Polyline({Point(0, 51), Point(40, 53), Point(100, 49)}),
                         Polyline({Point(10, 126), Point(90, 118)}), Polyline({Point(0, 300), Point(9, 300)})};
  const EvalReport r = precision_recall({pred}, {kGt}, {1, 2, 3, 5, 10, 20});
  for (std::size_t k = 1; k < r.scores.size(); ++k) {
    EXPECT_LE(r.scores[k - 1].precision, r.scores[k].precision);
    EXPECT_LE(r.scores[k - 1].recall, r.scores[k].recall);
  }
  const EvalReport s = precision_recall({kGt}, {pred}, {1, 2, 3, 5, 10, 20});
  for (std::size_t k = 0; k < r.scores.size(); ++k) {
    EXPECT_EQ(r.scores[k].precision, s.scores[k].recall);
    EXPECT_EQ(r.scores[k].recall, s.scores[k].precision);
  }
}

TEST(Eval, EmptyPredictionsAreFlagged) {
  const EvalReport r = precision_recall({PolylineSet{}}, {kGt});
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_FALSE(r.recall_undefined);
  EXPECT_EQ(r.at(10).precision, 0.0);
  EXPECT_EQ(r.at(10).f1, 0.0);
  EXPECT_EQ(r.topology.fraction, 0.0);
  EXPECT_THROW(precision_recall({kGt}, {}), ParameterError);
  EXPECT_THROW(precision_recall({kGt}, {kGt}, {}), ParameterError);
}

TEST(Topology, SplitPredictionFailsThatBoundary) {
  const PolylineSet split{Polyline({Point(0, 50), Point(45, 50)}), Polyline({Point(55, 50), Point(100, 50)}),
                          kGt[1]};
  const TopologyScore t = topology_correctness(split, kGt);
  EXPECT_EQ(t.gt_count, 2);
  EXPECT_EQ(t.correct_count, 1);
  EXPECT_EQ(t.assignments, (std::vector<int>{0, 0, 1}));
}

TEST(Topology, LargestIntersectionWinsAndTiesGoLow) {
  // Runs along GT 0 for 100 px, then 30 px near GT 1.
  const PolylineSet a{Polyline({Point(0, 0), Point(100, 0)}), Polyline({Point(0, 30), Point(100, 30)})};
  const PolylineSet pred{Polyline({Point(0, 2), Point(100, 2), Point(130, 28)})};
  EXPECT_EQ(topology_correctness(pred, a).assignments[0], 0);
  // Exactly halfway between two GT lines: both counts equal.
  const PolylineSet middle{Polyline({Point(0, 15), Point(100, 15)})};
  EXPECT_EQ(topology_correctness(middle, a).assignments[0], 0);
  const PolylineSet nowhere{Polyline({Point(0, 500), Point(100, 500)})};
  EXPECT_EQ(topology_correctness(nowhere, a).assignments[0], -1);
}

TEST(Topology, OptionalCoverage) {
  const PolylineSet gt{Polyline({Point(0, 0), Point(200, 0)})};
  const PolylineSet stub{Polyline({Point(0, 1), Point(20, 1)})};
  EXPECT_EQ(topology_correctness(stub, gt).fraction, 1.0);
  EXPECT_EQ(topology_correctness(stub, gt, 20.0, 0.5).fraction, 0.0);
  EXPECT_EQ(topology_correctness(PolylineSet{}, PolylineSet{}).fraction, 1.0);
}

TEST(Report, CsvMirrorsTheTable) {
  const EvalReport r = precision_recall({kGt}, {kGt}, {2, 5});
  EXPECT_EQ(report_csv(r, "oracle"),
            "method,P@2,P@5,R@2,R@5,F1@2,F1@5,topology\n"
            "oracle,100.0,100.0,100.0,100.0,100.0,100.0,100.0\n");
}

TEST(SegmentIndex, MatchesBruteForce) {
  const SegmentIndex idx(kGt, 7.0);
  for (double x = -10; x <= 110; x += 3.7) {
    for (double y = 40; y <= 140; y += 2.3) {
      const Point p(x, y);
      double best = INFINITY;
      for (const auto& l : kGt)
        for (std::size_t k = 1; k < l.size(); ++k)
          best = std::min(best, point_segment_distance(p, l.points()[k - 1], l.points()[k]));
      if (best <= 7.0) {
        EXPECT_DOUBLE_EQ(idx.distance(p), best);
      } else {
        EXPECT_TRUE(std::isinf(idx.distance(p)));
      }
    }
  }
}
