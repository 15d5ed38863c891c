#include <algorithm>

#include <gtest/gtest.h>

#include "lanegraph/dag.hpp"

using namespace lanegraph;

namespace {

bool has_rule(const std::vector<Violation>& v, VertexId id, const std::string& rule) {
  return std::any_of(v.begin(), v.end(),
                     [&](const Violation& x) { return x.id == id && x.rule == rule; });
}

LaneDag chain(int n, double y = 0.0) {
  LaneDag d;
  VertexId v = d.add_root(Point(0, y), Angle(0));
  for (int i = 1; i < n; ++i) v = d.add_child(v, Point(10.0 * i, y), Angle(0), VertexState::Normal);
  return d;
}

}  // namespace

TEST(Dag, StateNames) {
  for (auto s : {VertexState::Normal, VertexState::Fork, VertexState::Terminate}) {
    EXPECT_EQ(parse_vertex_state(to_string(s)), s);
  }
  EXPECT_THROW(parse_vertex_state("Split"), ParameterError);
}

TEST(Dag, ChainIsValidAndGivesOnePolyline) {
  const LaneDag d = chain(5);
  EXPECT_TRUE(validate(d).empty());
  const auto lines = to_polylines(d);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].size(), 5u);
  EXPECT_EQ(d.count(VertexState::Normal), 5u);
}

TEST(Dag, ForkGivesTwoPolylinesSharingThePoint) {
  LaneDag d;
  VertexId v = d.add_root(Point(0, 0), Angle(0));
  v = d.add_child(v, Point(10, 0), Angle(0), VertexState::Normal);
  const VertexId fork = d.add_child(v, Point(20, 0), Angle(0), VertexState::Fork);
  VertexId a = d.add_child(fork, Point(30, 0.5), Angle(0.05), VertexState::Normal);
  VertexId b = d.add_child(fork, Point(30, 6), Angle(0.54), VertexState::Normal);
  d.add_child(a, Point(40, 1), Angle(0.05), VertexState::Normal);
  d.add_child(b, Point(40, 12), Angle(0.54), VertexState::Normal);
  EXPECT_TRUE(validate(d).empty());
  EXPECT_EQ(primary_child(d, fork), a);

  const auto lines = to_polylines(d);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].size(), 5u);
  EXPECT_EQ(lines[1].size(), 3u);
  EXPECT_EQ(lines[1].points().front(), Point(20, 0));
  EXPECT_EQ(lines[1].points().back(), Point(40, 12));
  EXPECT_EQ(lines[0].id(), 0);
  EXPECT_EQ(lines[1].id(), 1);
}

TEST(Dag, TwoRootsOneTerminating) {
  LaneDag d = chain(6, 0.0);
  VertexId v = d.add_root(Point(0, 30), Angle(0));
  v = d.add_child(v, Point(10, 20), Angle(-0.78), VertexState::Normal);
  v = d.add_child(v, Point(20, 10), Angle(-0.78), VertexState::Normal);
  d.add_child(v, Point(30, 1), Angle(-0.73), VertexState::Terminate);
  EXPECT_TRUE(validate(d).empty());
  const auto lines = to_polylines(d);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].size(), 6u);
  EXPECT_EQ(lines[1].points().back(), Point(30, 1));
}

TEST(Dag, ForkWithOneChild) {
  LaneDag d = chain(3);
  d.vertex(1).state = VertexState::Fork;
  EXPECT_TRUE(has_rule(validate(d), 1, "fork-arity"));
  EXPECT_THROW(require_valid(d), StructuralError);
  EXPECT_THROW(to_polylines(d), StructuralError);
}

TEST(Dag, LinkMismatch) {
  LaneDag d = chain(3);
  d.vertex(2).parent = 0;
  EXPECT_TRUE(has_rule(validate(d), 2, "link-consistency"));
}

TEST(Dag, OtherRules) {
  {
    LaneDag d = chain(3);
    d.vertex(2).position = Point(NAN, 0);
    EXPECT_TRUE(has_rule(validate(d), 2, "non-finite"));
  }
  {
    LaneDag d = chain(3);
    d.vertex(1).children.push_back(7);
    EXPECT_TRUE(has_rule(validate(d), 1, "dangling"));
  }
  {
    LaneDag d = chain(3);
    d.vertex(2).state = VertexState::Terminate;
    d.vertex(1).state = VertexState::Terminate;
    EXPECT_TRUE(has_rule(validate(d), 1, "terminate-arity"));
  }
  {
    LaneDag d;
    d.add_root(Point(0, 0), Angle(0));
    EXPECT_TRUE(has_rule(validate(d), 0, "isolated-root"));
  }
  {
    // 0 -> 1 -> 2 -> 1 with no root at all: a cycle.
    std::vector<DagVertex> vs(3);
    for (int i = 0; i < 3; ++i) vs[i].id = i;
    vs[1].parent = 2;
    vs[1].children = {2};
    vs[2].parent = 1;
    vs[2].children = {1};
    vs[0].children = {};
    const auto v = validate(LaneDag(vs, {0}));
    EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.rule == "cycle"; }));
  }
}
