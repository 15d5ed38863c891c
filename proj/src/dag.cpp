#include "lanegraph/dag.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "lanegraph/errors.hpp"

namespace lanegraph {

std::string_view to_string(VertexState s) {
  switch (s) {
    case VertexState::Normal: return "normal";
    case VertexState::Fork: return "fork";
    case VertexState::Terminate: return "terminate";
  }
  return "normal";
}

VertexState parse_vertex_state(std::string_view s) {
  if (s == "normal") return VertexState::Normal;
  if (s == "fork") return VertexState::Fork;
  if (s == "terminate") return VertexState::Terminate;
  throw ParameterError("unknown vertex state '" + std::string(s) + "'");
}

VertexId LaneDag::add_root(const Point& position, Angle theta, VertexState state) {
  const auto id = static_cast<VertexId>(vertices_.size());
  vertices_.push_back({id, position, theta, state, std::nullopt, {}});
  roots_.push_back(id);
  return id;
}

VertexId LaneDag::add_child(VertexId parent, const Point& position, Angle theta,
                            VertexState state) {
  const auto id = static_cast<VertexId>(vertices_.size());
  vertex(parent).children.push_back(id);
  vertices_.push_back({id, position, theta, state, parent, {}});
  return id;
}

std::size_t LaneDag::count(VertexState s) const {
  std::size_t n = 0;
  for (const auto& v : vertices_) n += v.state == s;
  return n;
}

std::vector<Violation> validate(const LaneDag& dag) {
  std::vector<Violation> out;
  const auto& vs = dag.vertices();
  const auto n = static_cast<VertexId>(vs.size());
  auto in_range = [&](VertexId id) { return id >= 0 && id < n; };

  std::vector<int> listed_as_child(vs.size(), 0);
  std::vector<char> is_root(vs.size(), 0);
  for (VertexId r : dag.roots()) {
    if (!in_range(r)) {
      out.push_back({r, "dangling", "root id out of range"});
      continue;
    }
    if (is_root[r]) out.push_back({r, "root-parent", "root listed twice"});
    is_root[r] = 1;
  }

  for (VertexId i = 0; i < n; ++i) {
    const DagVertex& v = vs[i];
    if (v.id != i) {
      out.push_back({i, "id-index", "vertex at index " + std::to_string(i) + " has id " +
                                        std::to_string(v.id)});
    }
    if (!is_finite(v.position) || !std::isfinite(v.theta.radians())) {
      out.push_back({i, "non-finite", "position or angle is not finite"});
    }
    for (VertexId c : v.children) {
      if (!in_range(c)) {
        out.push_back({i, "dangling", "child " + std::to_string(c) + " out of range"});
        continue;
      }
      ++listed_as_child[c];
      if (vs[c].parent != i) {
        out.push_back({i, "link-consistency",
                       "child " + std::to_string(c) + " does not name it as parent"});
      }
    }
    if (v.parent) {
      if (!in_range(*v.parent)) {
        out.push_back({i, "dangling", "parent out of range"});
      } else {
        const auto& siblings = vs[*v.parent].children;
        if (std::find(siblings.begin(), siblings.end(), i) == siblings.end()) {
          out.push_back({i, "link-consistency", "parent " + std::to_string(*v.parent) +
                                                    " does not list it as child"});
        }
      }
      if (is_root[i]) out.push_back({i, "root-parent", "root has a parent"});
    } else if (!is_root[i]) {
      out.push_back({i, "root-parent", "parentless vertex missing from roots"});
    } else if (v.children.empty()) {
      out.push_back({i, "isolated-root", "root without children traces no boundary"});
    }

    const auto arity = v.children.size();
    switch (v.state) {
      case VertexState::Fork:
        if (arity != 2) {
          out.push_back({i, "fork-arity", std::to_string(arity) + " children, expected 2"});
        }
        break;
      case VertexState::Terminate:
        if (arity != 0) {
          out.push_back({i, "terminate-arity", std::to_string(arity) + " children, expected 0"});
        }
        break;
      case VertexState::Normal:
        if (arity > 1) {
          out.push_back({i, "normal-arity", std::to_string(arity) + " children, expected <= 1"});
        }
        break;
    }
  }
  for (VertexId i = 0; i < n; ++i) {
    if (listed_as_child[i] > 1) {
      out.push_back({i, "link-consistency", "listed as child by several vertices"});
    }
  }

  // Cycle check: walk parent pointers; a forest walk from any vertex reaches a root
  // in at most n steps.
  for (VertexId i = 0; i < n; ++i) {
    VertexId cur = i;
    VertexId steps = 0;
    while (vs[cur].parent && in_range(*vs[cur].parent) && steps <= n) {
      cur = *vs[cur].parent;
      ++steps;
    }
    if (steps > n) out.push_back({i, "cycle", "parent chain does not reach a root"});
  }
  return out;
}

void require_valid(const LaneDag& dag) {
  const auto violations = validate(dag);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid lane DAG:";
  for (const auto& v : violations) msg << " [" << v.id << " " << v.rule << ": " << v.detail << "]";
  throw StructuralError(msg.str());
}

VertexId primary_child(const LaneDag& dag, VertexId fork) {
  const DagVertex& f = dag.vertex(fork);
  const Angle incoming = f.parent && dag.vertex(*f.parent).position != f.position
                             ? heading_between(dag.vertex(*f.parent).position, f.position)
                             : f.theta;
  VertexId best = -1;
  double best_dev = 0.0;
  for (VertexId c : f.children) {
    const Point& p = dag.vertex(c).position;
    const double dev = p == f.position ? 0.0 : angular_distance(heading_between(f.position, p), incoming);
    if (best < 0 || dev < best_dev || (dev == best_dev && c < best)) {
      best = c;
      best_dev = dev;
    }
  }
  return best;
}

std::vector<Polyline> to_polylines(const LaneDag& dag) {
  require_valid(dag);
  std::vector<Polyline> out;
  // (start vertex, first vertex to follow)
  std::deque<std::pair<VertexId, VertexId>> pending;
  auto trace = [&](std::vector<Point> pts, VertexId cursor) {
    for (;;) {
      const DagVertex& v = dag.vertex(cursor);
      if (v.children.empty()) break;
      VertexId next = v.children.front();
      if (v.children.size() == 2) {
        next = primary_child(dag, cursor);
        const VertexId other = v.children[0] == next ? v.children[1] : v.children[0];
        pending.emplace_back(cursor, other);
      }
      pts.push_back(dag.vertex(next).position);
      cursor = next;
    }
    out.emplace_back(std::move(pts), static_cast<int>(out.size()));
  };
  for (VertexId r : dag.roots()) trace({dag.vertex(r).position}, r);
  while (!pending.empty()) {
    const auto [fork, first] = pending.front();
    pending.pop_front();
    trace({dag.vertex(fork).position, dag.vertex(first).position}, first);
  }
  return out;
}

}  // namespace lanegraph
