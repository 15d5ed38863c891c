#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "lanegraph/io.hpp"

using namespace lanegraph;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "lanegraph_io_test";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Json, CanonicalFormIsSortedAndPrecise) {
  const Json j = {{"b", 0.1}, {"a", {1, 2}}, {"c", "x"}};
  EXPECT_EQ(canonical_json(j), R"({"a":[1,2],"b":0.10000000000000001,"c":"x"})");
  EXPECT_THROW(canonical_json(Json(std::nan(""))), NumericError);
}

TEST(Json, FileRoundTrip) {
  const fs::path p = scratch() / "x.json";
  const Json j = {{"k", {1.5, -2.25e-7}}, {"s", "text"}};
  write_json(p, j);
  EXPECT_EQ(read_json(p), j);
  EXPECT_THROW(read_json(scratch() / "missing.json"), IoError);
  write_text_atomic(p, "{not json");
  EXPECT_THROW(read_json(p), IoError);
}

TEST(Png, SixteenBitRoundTrip) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  RealGrid g(17, 23);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = u(rng);
  const fs::path p = scratch() / "g.png";
  write_png16(p, g);
  EXPECT_LE((read_png16(p) - g).abs().maxCoeff(), 0.5 / 65535 + 1e-12);
}

TEST(Png, RgbRoundTripAndDeterminism) {
  RgbImage im(5, 7);
  for (std::size_t i = 0; i < im.data.size(); ++i) im.data[i] = static_cast<std::uint8_t>(i * 37);
  const fs::path a = scratch() / "a.png", b = scratch() / "b.png";
  write_png_rgb(a, im);
  write_png_rgb(b, im);
  EXPECT_EQ(read_text(a), read_text(b));
  const RgbImage back = read_png_rgb(a);
  EXPECT_EQ(back.height, 5);
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.data, im.data);
  EXPECT_THROW(read_png16(a), IoError);
}

TEST(Raster, SidecarCarriesResolution) {
  IntensityRaster r;
  r.values = RealGrid::Constant(4, 6, 0.25);
  r.resolution_m_per_px = 0.1;
  const fs::path p = scratch() / "r.png";
  write_raster(p, r);
  EXPECT_TRUE(fs::exists(sidecar_path(p)));
  const IntensityRaster back = read_raster(p);
  EXPECT_DOUBLE_EQ(back.resolution_m_per_px, 0.1);
  EXPECT_NEAR(back.values(2, 3), 0.25, 1e-5);

  DistanceField f;
  f.values = RealGrid::Constant(4, 6, 8.0);
  write_field(scratch() / "f.png", f);
  EXPECT_NEAR(read_field(scratch() / "f.png").values(1, 1), 8.0, 1e-3);
}

TEST(DagJson, RoundTripKeepsEverything) {
  LaneDag d;
  VertexId v = d.add_root(Point(0.5, 1.25), Angle(0.1));
  const VertexId f = d.add_child(v, Point(50.125, 3.0), Angle(0.05), VertexState::Fork);
  d.add_child(f, Point(100, 3), Angle(0.0), VertexState::Normal);
  d.add_child(f, Point(99, 20), Angle(0.33), VertexState::Terminate);
  const Json j = dag_to_json(d);
  EXPECT_EQ(dag_from_json(j), d);
  EXPECT_EQ(polylines_from_json(j), to_polylines(d));
  EXPECT_EQ(polylines_from_json(polylines_to_json(to_polylines(d))), to_polylines(d));
  EXPECT_THROW(dag_from_json(Json::object()), IoError);
  EXPECT_THROW(polylines_from_json(Json{{"polylines", {{{"id", 0}}}}}), IoError);
}
