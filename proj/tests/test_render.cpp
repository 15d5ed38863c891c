#include <gtest/gtest.h>

#include "lanegraph/render.hpp"

using namespace lanegraph;

namespace {

IntensityRaster ramp(int h, int w) {
  IntensityRaster r;
  r.values.resize(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) r.values(y, x) = static_cast<double>(x) / (w - 1);
  return r;
}

Rgb pixel(const RgbImage& im, int r, int c) {
  const std::uint8_t* p = im.at(r, c);
  return {p[0], p[1], p[2]};
}

}  // namespace

TEST(Render, NothingToDrawIsGrey) {
  const IntensityRaster r = ramp(20, 30);
  const RgbImage im = render_overlay(r, {});
  EXPECT_EQ(im.data, grayscale(r).data);
  EXPECT_EQ(pixel(im, 5, 29), (Rgb{255, 255, 255}));
  EXPECT_EQ(pixel(im, 5, 0), (Rgb{0, 0, 0}));
}

TEST(Render, VerticesAndForksTakeTheirColours) {
  const IntensityRaster r = ramp(40, 60);
  Overlay o;
  o.predictions = {Polyline({Point(5, 10), Point(30, 10), Point(55, 20)})};
  o.ground_truth = {Polyline({Point(5, 30), Point(55, 30)})};
  o.forks = {Point(30, 10)};
  const RgbImage im = render_overlay(r, o);
  EXPECT_EQ(pixel(im, 10, 5), prediction_color(0));
  EXPECT_EQ(pixel(im, 20, 55), prediction_color(0));
  EXPECT_EQ(pixel(im, 30, 40), ground_truth_color(0));
  EXPECT_EQ(pixel(im, 10, 30), kForkMarker);
  EXPECT_EQ(pixel(im, 12, 32), kForkMarker);
  EXPECT_NE(prediction_color(0), ground_truth_color(0));
}

TEST(Render, SideBySideStacksTwoPanels) {
  const IntensityRaster r = ramp(25, 40);
  Overlay o;
  o.predictions = {Polyline({Point(0, 5), Point(39, 5)})};
  o.ground_truth = {Polyline({Point(0, 15), Point(39, 15)})};
  const RgbImage im = render_side_by_side(r, o);
  EXPECT_EQ(im.height, 50);
  EXPECT_EQ(im.width, 40);
  EXPECT_EQ(pixel(im, 5, 20), prediction_color(0));
  EXPECT_EQ(pixel(im, 25 + 15, 20), ground_truth_color(0));
  EXPECT_NE(pixel(im, 15, 20), ground_truth_color(0));
  EXPECT_NE(pixel(im, 25 + 5, 20), prediction_color(0));
}

TEST(Render, ForkPositions) {
  LaneDag d;
  const VertexId a = d.add_root(Point(0, 0), Angle(0));
  const VertexId f = d.add_child(a, Point(10, 0), Angle(0), VertexState::Fork);
  d.add_child(f, Point(20, 0), Angle(0), VertexState::Normal);
  d.add_child(f, Point(20, 5), Angle(0.4), VertexState::Normal);
  EXPECT_EQ(fork_positions(d), (std::vector<Point>{Point(10, 0)}));
}
