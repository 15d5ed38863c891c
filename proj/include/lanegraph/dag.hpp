#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lanegraph/geom.hpp"

namespace lanegraph {

enum class VertexState : std::uint8_t { Normal = 0, Fork = 1, Terminate = 2 };

inline constexpr int kStateCount = 3;

std::string_view to_string(VertexState s);
VertexState parse_vertex_state(std::string_view s);

using VertexId = std::int64_t;

struct DagVertex {
  VertexId id = 0;
  Point position = Point::Zero();
  // Heading of the segment arriving at this vertex; for roots, the initial tangent.
  Angle theta;
  VertexState state = VertexState::Normal;
  std::optional<VertexId> parent;
  std::vector<VertexId> children;

  friend bool operator==(const DagVertex&, const DagVertex&) = default;
};

struct Violation {
  VertexId id;
  std::string rule;
  std::string detail;
};

/// Forest of out-trees over lane-boundary vertices. Vertex ids are dense and equal
/// to the index in vertices().
class LaneDag {
 public:
  LaneDag() = default;
  // Unchecked assembly, for deserialisation and tests; run validate() afterwards.
  LaneDag(std::vector<DagVertex> vertices, std::vector<VertexId> roots)
      : vertices_(std::move(vertices)), roots_(std::move(roots)) {}

  VertexId add_root(const Point& position, Angle theta,
                    VertexState state = VertexState::Normal);
  VertexId add_child(VertexId parent, const Point& position, Angle theta, VertexState state);

  const DagVertex& vertex(VertexId id) const { return vertices_.at(static_cast<std::size_t>(id)); }
  DagVertex& vertex(VertexId id) { return vertices_.at(static_cast<std::size_t>(id)); }
  const std::vector<DagVertex>& vertices() const { return vertices_; }
  std::vector<DagVertex>& vertices() { return vertices_; }
  const std::vector<VertexId>& roots() const { return roots_; }
  std::vector<VertexId>& roots() { return roots_; }

  std::size_t size() const { return vertices_.size(); }
  bool empty() const { return vertices_.empty(); }
  std::size_t count(VertexState s) const;

  friend bool operator==(const LaneDag&, const LaneDag&) = default;

 private:
  std::vector<DagVertex> vertices_;
  std::vector<VertexId> roots_;
};

/// Every broken invariant, as (vertex id, rule). Rules: id-index, non-finite,
/// dangling, link-consistency, root-parent, isolated-root, fork-arity,
/// terminate-arity, normal-arity, cycle.
std::vector<Violation> validate(const LaneDag& dag);

// Throws StructuralError listing the violations, if any.
void require_valid(const LaneDag& dag);

// Of a fork's two children, the one whose first segment turns least relative to the
// fork's incoming direction; ties go to the smaller id.
VertexId primary_child(const LaneDag& dag, VertexId fork);

/// One polyline per maximal chain: each root starts a polyline that follows the
/// primary child at forks; each fork starts another polyline at the fork position
/// running down the secondary child. Ids are assigned in emission order.
std::vector<Polyline> to_polylines(const LaneDag& dag);

}  // namespace lanegraph
