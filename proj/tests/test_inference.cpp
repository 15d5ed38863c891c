#include <cmath>

#include <gtest/gtest.h>

#include "lanegraph/eval.hpp"
#include "lanegraph/inference.hpp"
#include "lanegraph/synth.hpp"

using namespace lanegraph;

namespace {

struct Fixture {
  GroundTruthScene scene;
  DistanceField field;
};

Fixture oracle_scene(std::uint64_t seed, int lanes, const std::string& events, double length = 200.0) {
  SceneSpec spec;
  spec.seed = seed;
  spec.num_lanes = lanes;
  spec.length_m = length;
  spec.events = parse_events(events);
  Fixture f{generate(spec), {}};
  f.field = inverse_threshold_dt(f.scene.gt_polylines, f.scene.raster.height(), f.scene.raster.width());
  return f;
}

// Largest distance from a vertex of `a` to the polylines of `b`.
double max_vertex_gap(const LaneDag& a, const LaneDag& b) {
  const SegmentIndex index(to_polylines(b), 1e6);
  double worst = 0.0;
  for (const auto& v : a.vertices()) worst = std::max(worst, index.distance(v.position));
  return worst;
}

}  // namespace

TEST(InitialVertices, OnePerParallelBoundary) {
  const Fixture f = oracle_scene(3, 3, "");
  const auto init = initial_vertices(f.field);
  ASSERT_EQ(init.size(), 4u);
  for (std::size_t k = 0; k < init.size(); ++k) {
    EXPECT_LT(init[k].position.x(), 200.0);
    EXPECT_LT(std::abs(init[k].angle.radians()), 0.3);
    if (k > 0) {
      EXPECT_GT(init[k].position.y(), init[k - 1].position.y());
    }
  }
}

TEST(InitialVertices, EmptyField) {
  DistanceField f;
  f.values = RealGrid::Zero(50, 80);
  EXPECT_TRUE(initial_vertices(f).empty());
}

TEST(InitialVertices, FloatingSegmentKeepsTheEntryEnd) {
  const DistanceField f = inverse_threshold_dt(std::vector<Polyline>{Polyline({Point(100, 100), Point(600, 100)})}, 200, 900);
  const BinaryMask skel = skeletonize(binarize(f, 4.0));
  EXPECT_EQ(skeleton_endpoints(skel).size(), 2u);
  const auto init = initial_vertices(f, skel);
  ASSERT_EQ(init.size(), 1u);
  EXPECT_LT(init[0].position.x(), 200.0);
  EXPECT_LT(std::abs(init[0].angle.radians()), 0.1);
}

TEST(Discover, ParallelLanesGiveOneChainEach) {
  const Fixture f = oracle_scene(4, 3, "");
  const DistanceFieldOracle oracle;
  const InferenceResult r = discover(f.field, oracle, initial_vertices(f.field));
  EXPECT_TRUE(validate(r.dag).empty());
  EXPECT_FALSE(r.budget_exceeded);
  EXPECT_EQ(to_polylines(r.dag).size(), 4u);
  EXPECT_EQ(r.dag.count(VertexState::Fork), 0u);
  EXPECT_EQ(r.dag.count(VertexState::Terminate), 0u);
  EXPECT_EQ(topology_correctness(to_polylines(r.dag), f.scene.gt_polylines).fraction, 1.0);
}

TEST(Discover, ForkSceneHasOneForkAndAnExtraPolyline) {
  const Fixture f = oracle_scene(7, 2, "fork@80");
  const DistanceFieldOracle oracle;
  const InferenceResult r = infer(f.field, oracle);
  ASSERT_TRUE(validate(r.dag).empty());
  ASSERT_EQ(r.dag.count(VertexState::Fork), 1u);
  for (const auto& v : r.dag.vertices()) {
    if (v.state == VertexState::Fork) {
      EXPECT_EQ(v.children.size(), 2u);
    }
  }
  EXPECT_EQ(to_polylines(r.dag).size(), r.dag.roots().size() + 1);
  EXPECT_EQ(topology_correctness(to_polylines(r.dag), f.scene.gt_polylines).fraction, 1.0);
}

TEST(Discover, MergeSceneTerminatesNextToTheSurvivor) {
  const Fixture f = oracle_scene(8, 3, "merge@80");
  const DistanceFieldOracle oracle;
  const InferenceResult r = infer(f.field, oracle);
  ASSERT_TRUE(validate(r.dag).empty());
  ASSERT_EQ(r.dag.count(VertexState::Terminate), 1u);
  const auto preds = to_polylines(r.dag);
  for (const auto& v : r.dag.vertices()) {
    if (v.state != VertexState::Terminate) continue;
    // Distance to every predicted polyline other than the one ending here.
    double nearest_other = INFINITY;
    for (const auto& p : preds) {
      if (p.points().back() == v.position) continue;
      nearest_other = std::min(nearest_other, SegmentIndex({p}, 1e6).distance(v.position));
    }
    EXPECT_LE(nearest_other, oracle.config().merge_radius_px);
  }
  EXPECT_EQ(topology_correctness(preds, f.scene.gt_polylines).fraction, 1.0);
}

// The surviving boundary is traced before the merging one, so nothing is claimed
// yet when it passes the converging ridge. That ridge must not read as a fork.
TEST(Discover, ConvergingRidgeAheadIsNotAFork) {
  const Fixture f = oracle_scene(1072, 2, "fork@114,merge@253", 400.0);
  const DistanceFieldOracle oracle;
  const InferenceResult r = infer(f.field, oracle);
  EXPECT_EQ(r.dag.count(VertexState::Fork), 1u);
  EXPECT_EQ(r.dag.count(VertexState::Terminate), 1u);
}

TEST(Discover, VertexBudgetGivesAPartialValidDag) {
  const Fixture f = oracle_scene(4, 3, "");
  const DistanceFieldOracle oracle;
  InferenceConfig cfg;
  cfg.max_total_vertices = 30;
  const InferenceResult r = discover(f.field, oracle, initial_vertices(f.field), cfg);
  EXPECT_TRUE(r.budget_exceeded);
  EXPECT_LE(r.dag.size(), 30u);
  EXPECT_TRUE(validate(r.dag).empty());
}

TEST(Discover, InitOutsideTheFieldThrows) {
  const Fixture f = oracle_scene(4, 2, "", 100);
  const DistanceFieldOracle oracle;
  EXPECT_THROW(discover(f.field, oracle, {InitialVertex{Point(-5, 10), Angle(0)}}), DomainError);
}

TEST(Recover, CompleteDagIsUnchanged) {
  const Fixture f = oracle_scene(9, 3, "fork@60");
  const DistanceFieldOracle oracle;
  const InferenceResult full = infer(f.field, oracle);
  EXPECT_EQ(recover(f.field, oracle, full.dag).dag, full.dag);
}

TEST(Recover, FindsADroppedBoundary) {
  const Fixture f = oracle_scene(10, 3, "");
  const DistanceFieldOracle oracle;
  PipelineOptions drop;
  drop.drop_initial = {1};
  drop.recover = false;
  const InferenceResult partial = infer(f.field, oracle, {}, drop);
  drop.recover = true;
  const InferenceResult healed = infer(f.field, oracle, {}, drop);
  EXPECT_EQ(partial.dag.roots().size(), 3u);
  EXPECT_GT(healed.dag.roots().size(), partial.dag.roots().size());
  EXPECT_EQ(topology_correctness(to_polylines(healed.dag), f.scene.gt_polylines).fraction, 1.0);

  const auto before = (coverage_mask(partial.dag, f.field.height(), f.field.width(), 20) != 0).count();
  const auto after = (coverage_mask(healed.dag, f.field.height(), f.field.width(), 20) != 0).count();
  EXPECT_GE(after, before);
  EXPECT_EQ(recover(f.field, oracle, healed.dag).dag, healed.dag);

  PipelineOptions bad;
  bad.drop_initial = {9};
  EXPECT_THROW(infer(f.field, oracle, {}, bad), ParameterError);
}

TEST(Recover, FromNothingMatchesDiscovery) {
  const Fixture f = oracle_scene(12, 2, "");
  const DistanceFieldOracle oracle;
  const LaneDag direct = discover(f.field, oracle, initial_vertices(f.field)).dag;
  const LaneDag recovered = recover(f.field, oracle, LaneDag{}).dag;
  ASSERT_FALSE(recovered.empty());
  EXPECT_LE(max_vertex_gap(direct, recovered), 2.0);
  EXPECT_LE(max_vertex_gap(recovered, direct), 2.0);
}

TEST(Score, EmptyDagScoresZero) {
  const Fixture f = oracle_scene(4, 2, "", 100);
  EXPECT_EQ(dag_log_score(LaneDag{}, DistanceFieldOracle{}, f.field), 0.0);
}

TEST(Score, TwoVertexChainIsFiniteAndNegative) {
  const Fixture f = oracle_scene(4, 2, "", 100);
  const DistanceFieldOracle oracle;
  const InferenceResult r = infer(f.field, oracle);
  LaneDag two;
  const auto& root = r.dag.vertex(r.dag.roots()[0]);
  const auto& child = r.dag.vertex(root.children[0]);
  const VertexId id = two.add_root(root.position, root.theta);
  two.add_child(id, child.position, child.theta, child.state);
  const double s = dag_log_score(two, oracle, f.field);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_LT(s, 0.0);
  EXPECT_EQ(dag_log_score(two, oracle, f.field), s);
}

TEST(Score, OffFieldVertexThrows) {
  const Fixture f = oracle_scene(4, 2, "", 100);
  LaneDag d;
  const VertexId r = d.add_root(Point(10, 10), Angle(0));
  d.add_child(r, Point(-40, 10), Angle(3.1), VertexState::Normal);
  EXPECT_THROW(dag_log_score(d, DistanceFieldOracle{}, f.field), DomainError);
}

TEST(Score, GreedyBeatsEverySingleFlip) {
  const Fixture f = oracle_scene(13, 3, "fork@50");
  const DistanceFieldOracle oracle;
  const InferenceResult r = infer(f.field, oracle);
  const double base = dag_log_score(r.dag, oracle, f.field);
  const TraceBook book =
      TraceBook::replay(r.dag, f.field.height(), f.field.width(), oracle.config().merge_radius_px);
  for (const auto& v : r.dag.vertices()) {
    for (auto s : {VertexState::Normal, VertexState::Fork, VertexState::Terminate}) {
      if (s == v.state) continue;
      EXPECT_LE(relabel_score_delta(r.dag, oracle, f.field, book, v.id, s), 0.0) << v.id;
    }
  }
  // The local delta agrees with rescoring the whole flipped graph.
  for (VertexId id : {VertexId{3}, static_cast<VertexId>(r.dag.size() / 2)}) {
    LaneDag flipped = r.dag;
    const VertexState to = flipped.vertex(id).state == VertexState::Terminate ? VertexState::Normal
                                                                               : VertexState::Terminate;
    flipped.vertex(id).state = to;
    // Only flips that leave a valid graph can be rescored whole.
    if (r.dag.vertex(id).state == VertexState::Fork || !flipped.vertex(id).children.empty()) continue;
    const double delta = relabel_score_delta(r.dag, oracle, f.field, book, id, to);
    EXPECT_NEAR(dag_log_score(flipped, oracle, f.field) - base, delta, 1e-6);
  }
}
