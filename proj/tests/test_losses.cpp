#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lanegraph/losses.hpp"

using namespace lanegraph;

TEST(Chamfer, IdenticalPolylines) {
  const Polyline p({Point(0, 0), Point(7.5, 2), Point(12, -3)});
  const ChamferResult r = chamfer(p, p);
  EXPECT_EQ(r.value, 0.0);
  for (const Point& g : r.grad) EXPECT_EQ(g.norm(), 0.0);
}

TEST(Chamfer, ParallelSegmentsOffsetByThree) {
  const Polyline p({Point(0, 0), Point(10, 0)}), q({Point(0, 3), Point(10, 3)});
  EXPECT_NEAR(chamfer(p, q).value, 66.0, 1e-12);
  EXPECT_NEAR(chamfer(q, p).value, 66.0, 1e-12);
}

TEST(Chamfer, SymmetricAndDegenerateInput) {
  const Polyline p({Point(0, 0), Point(4.2, 1.1), Point(9, 9)}), q({Point(1, 2), Point(8, 3)});
  EXPECT_EQ(chamfer(p, q).value, chamfer(q, p).value);
  EXPECT_THROW(chamfer(p, q, 0.0), ParameterError);
}

TEST(Chamfer, GradientMatchesFiniteDifferences) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0, 20);
  const Polyline q({Point(u(rng), u(rng)), Point(u(rng), u(rng)), Point(u(rng), u(rng))});
  std::vector<Point> pts{Point(1.3, 2.7), Point(9.1, 4.4), Point(15.2, 13.9)};
  const ChamferResult r = chamfer(Polyline(pts), q, 0.5);
  const double h = 1e-6;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    for (int axis = 0; axis < 2; ++axis) {
      auto plus = pts, minus = pts;
      plus[k][axis] += h;
      minus[k][axis] -= h;
      const double fd = (chamfer(Polyline(plus), q, 0.5).value - chamfer(Polyline(minus), q, 0.5).value) / (2 * h);
      EXPECT_NEAR(r.grad[k][axis], fd, 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Cosine, ValuesAndGradient) {
  EXPECT_NEAR(cosine_loss(Point(2, 0), Point(5, 0)).value, 0.0, 1e-15);
  EXPECT_NEAR(cosine_loss(Point(0, 1), Point(0, -3)).value, 2.0, 1e-15);
  EXPECT_THROW(cosine_loss(Point(0, 0), Point(1, 0)), ParameterError);
  const Point pred(0.3, -1.2), gt(0.8, 0.1);
  const CosineResult r = cosine_loss(pred, gt);
  const double h = 1e-6;
  for (int axis = 0; axis < 2; ++axis) {
    Point a = pred, b = pred;
    a[axis] += h;
    b[axis] -= h;
    EXPECT_NEAR(r.grad[axis], (cosine_loss(a, gt).value - cosine_loss(b, gt).value) / (2 * h), 1e-6);
  }
}

TEST(Focal, OneHardSampleAmongPerfectOnes) {
  Eigen::MatrixXd probs(4, 3);
  probs << 1, 0, 0,  //
      0, 1, 0,       //
      0, 0, 1,       //
      0.5, 0.25, 0.25;
  const FocalResult r = focal_normalized(probs, {0, 1, 2, 0}, 2.0);
  EXPECT_NEAR(r.value, -std::log(0.5), 1e-12);
  EXPECT_FALSE(r.clamped);
}

TEST(Focal, GammaZeroIsCrossEntropy) {
  const Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(5, 3, 1.0 / 3.0);
  EXPECT_NEAR(focal_normalized(probs, {0, 1, 2, 0, 1}, 0.0).value, std::log(3.0), 1e-12);
}

TEST(Focal, ZeroTargetProbabilityIsClamped) {
  Eigen::MatrixXd probs(1, 2);
  probs << 1.0, 0.0;
  const FocalResult r = focal_normalized(probs, {1});
  EXPECT_TRUE(r.clamped);
  EXPECT_TRUE(std::isfinite(r.value));
}

TEST(Focal, BadInput) {
  Eigen::MatrixXd probs(1, 2);
  probs << 0.7, 0.2;
  EXPECT_THROW(focal_normalized(probs, {0}), ParameterError);
  probs << 0.7, 0.3;
  EXPECT_THROW(focal_normalized(probs, {2}), ParameterError);
  EXPECT_THROW(focal_normalized(probs, {0, 1}), ParameterError);
}

TEST(Focal, LogitGradientMatchesFiniteDifferences) {
  std::mt19937 rng(21);
  std::normal_distribution<double> n(0, 1.5);
  Eigen::MatrixXd z(6, 3);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = n(rng);
  const std::vector<int> t{0, 2, 1, 1, 0, 2};
  const FocalResult r = focal_normalized_logits(z, t);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      Eigen::MatrixXd a = z, b = z;
      a(i, j) += h;
      b(i, j) -= h;
      const double fd = (focal_normalized_logits(a, t).value - focal_normalized_logits(b, t).value) / (2 * h);
      EXPECT_NEAR(r.grad_logits(i, j), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(DtL2, ValuesAndGradient) {
  DistanceField a, b;
  a.values = RealGrid::Constant(3, 4, 2.0);
  b.values = RealGrid::Constant(3, 4, 3.0);
  EXPECT_EQ(dt_l2(a, a).value, 0.0);
  const DtL2Result r = dt_l2(a, b);
  EXPECT_NEAR(r.value, 1.0, 1e-15);
  EXPECT_NEAR(r.grad(1, 2), 2.0 * (2.0 - 3.0) / 12.0, 1e-15);
  DistanceField c;
  c.values = RealGrid::Zero(4, 3);
  EXPECT_THROW(dt_l2(a, c), ParameterError);
}

TEST(TotalLoss, DefaultWeights) {
  EXPECT_EQ(total_loss({}), 0.0);
  EXPECT_DOUBLE_EQ(total_loss({1, 1, 1, 1}), 121.0);
  EXPECT_DOUBLE_EQ(total_loss({0, 0, 3, 0}), 30.0);
  try {
    total_loss({1, NAN, 1, 1});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("cosine"), std::string::npos);
  }
  LossWeights w;
  w.lambda_dt = -1;
  EXPECT_THROW(w.validate(), ParameterError);
}
