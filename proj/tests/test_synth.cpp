#include <filesystem>

#include <gtest/gtest.h>

#include "lanegraph/io.hpp"
#include "lanegraph/synth.hpp"

using namespace lanegraph;
namespace fs = std::filesystem;

namespace {

SceneSpec small_spec(int lanes, const std::string& events = "") {
  SceneSpec s;
  s.seed = 42;
  s.num_lanes = lanes;
  s.length_m = 200.0;
  s.events = parse_events(events);
  return s;
}

// Centres of the bright runs met walking down one column.
std::vector<double> ridge_rows(const IntensityRaster& r, Eigen::Index col) {
  std::vector<double> centres;
  Eigen::Index start = -1;
  for (Eigen::Index row = 0; row <= r.height(); ++row) {
    const bool on = row < r.height() && r.values(row, col) > 0.5;
    if (on && start < 0) start = row;
    if (!on && start >= 0) {
      centres.push_back(0.5 * static_cast<double>(start + row - 1));
      start = -1;
    }
  }
  return centres;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lanegraph_synth_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Synth, ThreeLanesGiveFourEvenlySpacedRidges) {
  const GroundTruthScene s = generate(small_spec(3));
  EXPECT_EQ(s.gt_polylines.size(), 4u);
  EXPECT_EQ(s.gt_dag.count(VertexState::Fork), 0u);
  EXPECT_EQ(s.gt_dag.count(VertexState::Terminate), 0u);
  for (Eigen::Index col : {100, 1500, 3900}) {
    const auto rows = ridge_rows(s.raster, col);
    ASSERT_EQ(rows.size(), 4u) << "column " << col;
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_NEAR(rows[k] - rows[k - 1], 74.0, 1.0);
  }
  EXPECT_TRUE(validate(s.gt_dag).empty());
}

TEST(Synth, ForkHasTwoChildren) {
  const GroundTruthScene s = generate(small_spec(2, "fork@60"));
  ASSERT_EQ(s.gt_dag.count(VertexState::Fork), 1u);
  for (const auto& v : s.gt_dag.vertices()) {
    if (v.state == VertexState::Fork) {
      EXPECT_EQ(v.children.size(), 2u);
    }
  }
  EXPECT_EQ(s.gt_polylines.size(), 4u);
  EXPECT_TRUE(validate(s.gt_dag).empty());
}

TEST(Synth, MergeEndsOneBoundary) {
  const GroundTruthScene s = generate(small_spec(3, "merge@60"));
  EXPECT_EQ(s.gt_dag.count(VertexState::Terminate), 1u);
  EXPECT_EQ(s.gt_polylines.size(), 4u);
  EXPECT_TRUE(validate(s.gt_dag).empty());
}

TEST(Synth, PolylinesFollowFromTheDag) {
  SceneSpec spec = small_spec(4, "fork@40,merge@160");
  spec.length_m = 300.0;
  const GroundTruthScene s = generate(spec);
  EXPECT_EQ(to_polylines(s.gt_dag), s.gt_polylines);
}

TEST(Synth, SameSeedSameScene) {
  SceneSpec spec = small_spec(3, "fork@80");
  spec.noise = {0.05, 0.02};
  const GroundTruthScene a = generate(spec), b = generate(spec);
  EXPECT_TRUE((a.raster.values == b.raster.values).all());
  EXPECT_EQ(a.gt_dag, b.gt_dag);
  spec.seed += 1;
  EXPECT_FALSE((generate(spec).raster.values == a.raster.values).all());
}

TEST(Synth, NoiseOnlyTouchesPixels) {
  SceneSpec clean = small_spec(2, "merge@90");
  SceneSpec noisy = clean;
  noisy.noise = {0.05, 0.02};
  const GroundTruthScene a = generate(clean), b = generate(noisy);
  EXPECT_EQ(a.gt_dag, b.gt_dag);
  EXPECT_TRUE(b.raster.values.minCoeff() >= 0.0 && b.raster.values.maxCoeff() <= 1.0);
  EXPECT_GT((a.raster.values - b.raster.values).abs().maxCoeff(), 0.0);
}

TEST(Synth, InfeasibleSpecsNameTheEvent) {
  auto index_of = [](const SceneSpec& s) {
    try {
      s.validate();
    } catch (const SpecError& e) {
      return e.event_index();
    }
    return -2;
  };
  EXPECT_EQ(index_of(small_spec(1)), -1);
  EXPECT_EQ(index_of(small_spec(3, "fork@50,fork@100")), 1);   // ramps overlap
  EXPECT_EQ(index_of(small_spec(3, "fork@190")), 0);           // ramp runs off the end
  EXPECT_EQ(index_of(small_spec(2, "merge@20,merge@110")), 1);  // nothing left to merge
  EXPECT_EQ(index_of(small_spec(3, "fork@100,merge@20")), 1);  // unsorted
  EXPECT_EQ(index_of(small_spec(3, "fork@10:40,merge@60")), -2);
}

TEST(Synth, EventStrings) {
  const auto ev = parse_events("fork@150,merge@300:60");
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].kind, EventKind::Fork);
  EXPECT_DOUBLE_EQ(ev[0].position_m, 150.0);
  EXPECT_DOUBLE_EQ(ev[1].ramp_length_m, 60.0);
  EXPECT_EQ(parse_events(format_events(ev)).size(), 2u);
  EXPECT_TRUE(parse_events("").empty());
  for (const char* bad : {"fork", "split@3", "fork@x", "merge@12:", "fork@1.5q"}) {
    try {
      parse_events(bad);
      ADD_FAILURE() << bad;
    } catch (const ParameterError& e) {
      EXPECT_NE(std::string(e.what()).find(bad), std::string::npos) << e.what();
    }
  }
}

TEST(Synth, DiskRoundTrip) {
  SceneSpec spec = small_spec(3, "fork@70");
  spec.noise = {0.05, 0.0};
  const GroundTruthScene s = generate(spec);
  const fs::path dir = scratch("roundtrip");
  scene_to_disk(s, dir, spec);
  for (const char* f : {"raster.png", "raster.json", "gt.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const GroundTruthScene back = scene_from_disk(dir);
  EXPECT_EQ(back.gt_dag, s.gt_dag);
  EXPECT_LE((back.raster.values - s.raster.values).abs().maxCoeff(), 0.5 / 65535 + 1e-12);
  EXPECT_DOUBLE_EQ(back.raster.resolution_m_per_px, spec.resolution_m_per_px);
  fs::remove_all(dir);
}

TEST(Synth, MissingDirectoryIsNamed) {
  const fs::path nowhere = fs::temp_directory_path() / "lanegraph_no_such_dir";
  fs::remove_all(nowhere);
  try {
    scene_from_disk(nowhere);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(nowhere.string()), std::string::npos);
  }
}
