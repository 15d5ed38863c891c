#include "lanegraph/inference.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "lanegraph/errors.hpp"
#include "lanegraph/eval.hpp"

namespace lanegraph {
namespace {

constexpr double kEntryBandPx = 200.0;
constexpr double kSnapRadiusPx = 16.0;
constexpr double kDedupRadiusPx = 32.0;
constexpr int kTangentWalkPx = 10;

// Follows the skeleton from an endpoint for up to kTangentWalkPx pixels and returns
// the pixel reached.
Point walk_skeleton(const BinaryMask& skel, Eigen::Index r, Eigen::Index c) {
  // 4-neighbours first, so the walk hugs the curve instead of cutting corners.
  static constexpr int kDr[8] = {0, 1, 0, -1, 1, 1, -1, -1};
  static constexpr int kDc[8] = {1, 0, -1, 0, 1, -1, 1, -1};
  Eigen::Index pr = -1, pc = -1;
  for (int step = 0; step < kTangentWalkPx; ++step) {
    bool moved = false;
    for (int k = 0; k < 8 && !moved; ++k) {
      const Eigen::Index rr = r + kDr[k], cc = c + kDc[k];
      if (rr < 0 || cc < 0 || rr >= skel.rows() || cc >= skel.cols() || !skel(rr, cc)) continue;
      if (rr == pr && cc == pc) continue;
      // Do not step back next to where we came from.
      if (pr >= 0 && std::abs(rr - pr) <= 1 && std::abs(cc - pc) <= 1) continue;
      pr = r;
      pc = c;
      r = rr;
      c = cc;
      moved = true;
    }
    if (!moved) break;
  }
  return {static_cast<double>(c), static_cast<double>(r)};
}

// Highest field cell within kSnapRadiusPx; ties go to the nearest, then to (row, col).
Point snap_to_ridge(const DistanceField& field, const Point& p) {
  const auto reach = static_cast<Eigen::Index>(kSnapRadiusPx);
  const Eigen::Index r0 = std::lround(p.y()), c0 = std::lround(p.x());
  Point best = p;
  double best_v = -1.0, best_d2 = 0.0;
  for (Eigen::Index r = std::max<Eigen::Index>(0, r0 - reach);
       r <= std::min(field.height() - 1, r0 + reach); ++r) {
    for (Eigen::Index c = std::max<Eigen::Index>(0, c0 - reach);
         c <= std::min(field.width() - 1, c0 + reach); ++c) {
      const double d2 = double(r - r0) * (r - r0) + double(c - c0) * (c - c0);
      if (d2 > kSnapRadiusPx * kSnapRadiusPx) continue;
      const double v = field.values(r, c);
      if (v > best_v || (v == best_v && d2 < best_d2)) {
        best_v = v;
        best_d2 = d2;
        best = Point(static_cast<double>(c), static_cast<double>(r));
      }
    }
  }
  return best;
}

struct Endpoint {
  Point pixel;
  Angle tangent;
};

std::vector<Endpoint> endpoints_with_tangent(const BinaryMask& skel) {
  std::vector<Endpoint> out;
  for (const Point& e : skeleton_endpoints(skel)) {
    const Point q = walk_skeleton(skel, std::lround(e.y()), std::lround(e.x()));
    if (q == e) continue;
    out.push_back({e, heading_between(e, q)});
  }
  return out;
}

enum class StepKind { Append, Close, Stall, LostTrack };

struct Step {
  StepKind kind = StepKind::Close;
  Point position = Point::Zero();
  Angle angle;
  VertexState state = VertexState::Normal;
};

class Discoverer {
 public:
  Discoverer(const DistanceField& field, const HeaderSuite& headers, const InferenceConfig& cfg,
             LaneDag dag, TraceBook book)
      : field_(field), headers_(headers), cfg_(cfg), dag_(std::move(dag)), book_(std::move(book)) {}

  InferenceResult run(const std::vector<InitialVertex>& init) {
    for (const auto& v : init) queue_.push_back({true, v, -1});
    while (!queue_.empty() && !budget_exceeded_) {
      const Item item = queue_.front();
      queue_.pop_front();
      if (item.is_init) {
        start_root(item.init);
      } else {
        expand_fork(item.fork);
      }
    }
    // A fork whose second branch never materialised is an ordinary vertex.
    for (auto& v : dag_.vertices()) {
      if (v.state == VertexState::Fork && v.children.size() < 2) v.state = VertexState::Normal;
    }
    return {std::move(dag_), budget_exceeded_};
  }

 private:
  struct Item {
    bool is_init;
    InitialVertex init;
    VertexId fork;
  };

  bool budget_left(std::size_t needed) {
    if (dag_.size() + needed > static_cast<std::size_t>(cfg_.max_total_vertices)) {
      budget_exceeded_ = true;
      return false;
    }
    return true;
  }

  bool near_border(const Point& p) const {
    const double m = headers_.config().step_px + 0.5 * headers_.config().roi_w;
    return p.x() < m || p.y() < m || p.x() > field_.width() - 1.0 - m ||
           p.y() > field_.height() - 1.0 - m;
  }

  Step predict(const HeaderContext& ctx) const {
    Step s;
    const DirectionPrediction dir = headers_.predict_direction(ctx);
    if (dir.lost_track) {
      s.kind = StepKind::LostTrack;
      return s;
    }
    const PositionPrediction pos = headers_.predict_position(ctx, dir.angle);
    if (pos.exit_image || !field_.contains(pos.position)) return s;
    if ((pos.position - ctx.parent_position).norm() < 0.25 * headers_.config().step_px) {
      s.kind = near_border(ctx.parent_position) ? StepKind::Close : StepKind::Stall;
      return s;
    }
    s.kind = StepKind::Append;
    s.position = pos.position;
    s.angle = dir.angle;
    s.state = headers_.predict_state(ctx, dir.angle).state;
    return s;
  }

  VertexId append(VertexId parent, const Step& s) {
    const VertexId id = dag_.add_child(parent, s.position, s.angle, s.state);
    book_.record(dag_, id);
    return id;
  }

  void start_root(const InitialVertex& init) {
    if (!field_.contains(init.position)) return;
    if (book_.claimed().claimed_by_other(init.position, headers_.config().merge_radius_px, 0, 0,
                                         std::numeric_limits<std::int64_t>::max())) {
      return;
    }
    if (!budget_left(2)) return;
    const Step s = predict(book_.root_context(init, static_cast<VertexId>(dag_.size()), field_));
    if (s.kind != StepKind::Append) return;
    const VertexId root = dag_.add_root(init.position, init.angle, init.state);
    book_.record(dag_, root);
    trace(append(root, s));
  }

  void expand_fork(VertexId fork) {
    const DagVertex& f = dag_.vertex(fork);
    if (f.state != VertexState::Fork || f.children.size() != 1) return;
    if (!budget_left(1)) return;
    const Step s = predict(book_.child_context(dag_, fork, true, field_));
    if (s.kind != StepKind::Append) return;
    trace(append(fork, s));
  }

  void trace(VertexId cursor) {
    int steps = 1;
    for (;;) {
      const VertexState state = dag_.vertex(cursor).state;
      if (state == VertexState::Terminate) return;
      if (state == VertexState::Fork) queue_.push_back({false, {}, cursor});
      if (steps >= cfg_.max_steps_per_boundary) return;
      if (!budget_left(1)) return;
      const Step s = predict(book_.child_context(dag_, cursor, false, field_));
      switch (s.kind) {
        case StepKind::Close:
          return;
        case StepKind::Stall:
        case StepKind::LostTrack:
          dag_.vertex(cursor).state = VertexState::Terminate;
          return;
        case StepKind::Append:
          cursor = append(cursor, s);
          ++steps;
          break;
      }
    }
  }

  const DistanceField& field_;
  const HeaderSuite& headers_;
  const InferenceConfig& cfg_;
  LaneDag dag_;
  TraceBook book_;
  std::deque<Item> queue_;
  bool budget_exceeded_ = false;
};

std::vector<InitialVertex> snap_and_dedup(const DistanceField& field,
                                          const std::vector<Endpoint>& ends) {
  std::vector<InitialVertex> out;
  for (const auto& e : ends) {
    const Point p = snap_to_ridge(field, e.pixel);
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const InitialVertex& v) {
      return (v.position - p).norm() <= kDedupRadiusPx;
    });
    if (!duplicate) out.push_back({p, e.tangent, VertexState::Normal});
  }
  return out;
}

}  // namespace

void InferenceConfig::validate() const {
  if (max_steps_per_boundary < 1 || max_total_vertices < 1 || recovery_min_component_px < 1 ||
      !(recovery_cover_radius_px > 0.0)) {
    throw ParameterError("inference limits must be positive");
  }
  if (!(binarize_threshold > 0.0 && binarize_threshold < kFieldMax)) {
    throw ParameterError("binarize threshold must lie in (0, 10)");
  }
}

TraceBook::TraceBook(Eigen::Index rows, Eigen::Index cols, double merge_radius_px)
    : claimed_(rows, cols), merge_radius_px_(merge_radius_px) {}

TraceBook TraceBook::replay(const LaneDag& dag, Eigen::Index rows, Eigen::Index cols,
                            double merge_radius_px) {
  TraceBook book(rows, cols, merge_radius_px);
  for (VertexId v = 0; v < static_cast<VertexId>(dag.size()); ++v) book.record(dag, v);
  return book;
}

bool TraceBook::is_secondary(const LaneDag& dag, VertexId v) const {
  const DagVertex& vx = dag.vertex(v);
  if (!vx.parent) return false;
  const auto& siblings = dag.vertex(*vx.parent).children;
  return siblings.size() == 2 && v == std::max(siblings[0], siblings[1]);
}

void TraceBook::record(const LaneDag& dag, VertexId v) {
  if (static_cast<std::size_t>(v) != chains_.size()) {
    throw StructuralError("trace book must record vertices in id order");
  }
  const DagVertex& vx = dag.vertex(v);
  Chain chain;
  int ignore = 0;
  if (!vx.parent) {
    chain.label = next_label_++;
    claimed_.stamp_segment(vx.position, vx.position, chain.label, v);
  } else {
    const Chain& up = chains_.at(static_cast<std::size_t>(*vx.parent));
    if (is_secondary(dag, v)) {
      chain.label = next_label_++;
      ignore = up.label;
    } else {
      chain.label = up.label;
      ignore = up.ignore_after;
    }
    claimed_.stamp_segment(dag.vertex(*vx.parent).position, vx.position, chain.label, v);
  }
  if (ignore != ClaimedMask::kFree &&
      std::isinf(claimed_.distance_to_label(vx.position, ignore, merge_radius_px_, v + 1))) {
    ignore = ClaimedMask::kFree;  // clear of the chain it branched from
  }
  chain.ignore_after = ignore;
  chains_.push_back(chain);
}

HeaderContext TraceBook::child_context(const LaneDag& dag, VertexId parent, bool secondary,
                                       const DistanceField& field,
                                       std::optional<VertexState> parent_state) const {
  const DagVertex& p = dag.vertex(parent);
  const Chain& up = chains_.at(static_cast<std::size_t>(parent));
  HeaderContext ctx;
  ctx.parent_position = p.position;
  ctx.parent_angle = p.theta;
  ctx.parent_state = parent_state.value_or(p.state);
  ctx.field = &field;
  ctx.claimed = &claimed_;
  ctx.horizon = static_cast<std::int64_t>(dag.size());
  if (secondary) {
    ctx.own_label = next_label_;
    ctx.ignore_label = up.label;
    ctx.consumed_branch = dag.vertex(p.children.front()).theta;
  } else {
    ctx.own_label = up.label;
    ctx.ignore_label = up.ignore_after;
  }
  return ctx;
}

HeaderContext TraceBook::context_of(const LaneDag& dag, VertexId v, const DistanceField& field,
                                    std::optional<VertexState> parent_state) const {
  const DagVertex& vx = dag.vertex(v);
  if (!vx.parent) throw ParameterError("root vertices have no prediction context");
  const DagVertex& p = dag.vertex(*vx.parent);
  const Chain& up = chains_.at(static_cast<std::size_t>(*vx.parent));
  HeaderContext ctx;
  ctx.parent_position = p.position;
  ctx.parent_angle = p.theta;
  ctx.parent_state = parent_state.value_or(p.state);
  ctx.field = &field;
  ctx.claimed = &claimed_;
  ctx.horizon = v;
  ctx.own_label = label(v);
  if (is_secondary(dag, v)) {
    ctx.ignore_label = up.label;
    ctx.consumed_branch = dag.vertex(std::min(p.children[0], p.children[1])).theta;
  } else {
    ctx.ignore_label = up.ignore_after;
  }
  return ctx;
}

HeaderContext TraceBook::root_context(const InitialVertex& init, VertexId next_id,
                                      const DistanceField& field) const {
  HeaderContext ctx;
  ctx.parent_position = init.position;
  ctx.parent_angle = init.angle;
  ctx.parent_state = init.state;
  ctx.field = &field;
  ctx.claimed = &claimed_;
  ctx.own_label = next_label_;
  ctx.horizon = next_id + 1;
  return ctx;
}

std::vector<InitialVertex> initial_vertices(const DistanceField& field, double binarize_threshold) {
  return initial_vertices(field, skeletonize(binarize(field, binarize_threshold)));
}

std::vector<InitialVertex> initial_vertices(const DistanceField& field, const BinaryMask& skel) {
  const double bottom = field.height() - 1.0;
  std::vector<Endpoint> kept;
  for (const auto& e : endpoints_with_tangent(skel)) {
    const double s = std::sin(e.tangent.radians());
    const bool entry = e.pixel.x() <= kEntryBandPx;
    const bool from_top = e.pixel.y() <= kFieldReachPx && s > 0.0;
    const bool from_bottom = e.pixel.y() >= bottom - kFieldReachPx && s < 0.0;
    if (entry || from_top || from_bottom) kept.push_back(e);
  }
  auto out = snap_and_dedup(field, kept);
  std::stable_sort(out.begin(), out.end(), [](const InitialVertex& a, const InitialVertex& b) {
    return a.position.y() != b.position.y() ? a.position.y() < b.position.y()
                                            : a.position.x() < b.position.x();
  });
  return out;
}

InferenceResult discover(const DistanceField& field, const HeaderSuite& headers,
                         const std::vector<InitialVertex>& init, const InferenceConfig& cfg) {
  cfg.validate();
  for (const auto& v : init) {
    if (!field.contains(v.position)) {
      throw DomainError("initial vertex outside the field");
    }
  }
  TraceBook book(field.height(), field.width(), headers.config().merge_radius_px);
  return Discoverer(field, headers, cfg, LaneDag{}, std::move(book)).run(init);
}

namespace {

InferenceResult continue_from(const DistanceField& field, const HeaderSuite& headers,
                              const LaneDag& dag, const std::vector<InitialVertex>& seeds,
                              const InferenceConfig& cfg) {
  require_valid(dag);
  if (seeds.empty()) return {dag, false};
  TraceBook book =
      TraceBook::replay(dag, field.height(), field.width(), headers.config().merge_radius_px);
  return Discoverer(field, headers, cfg, dag, std::move(book)).run(seeds);
}

}  // namespace

BinaryMask coverage_mask(const LaneDag& dag, Eigen::Index rows, Eigen::Index cols, double radius) {
  BinaryMask out = BinaryMask::Zero(rows, cols);
  const auto lines = to_polylines(dag);
  if (lines.empty()) return out;
  const SegmentIndex index(lines, radius);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = std::isfinite(index.distance(Point(double(c), double(r))));
    }
  }
  return out;
}

std::vector<InitialVertex> recovery_seeds(const DistanceField& field, const LaneDag& dag,
                                          const InferenceConfig& cfg) {
  return recovery_seeds(field, skeletonize(binarize(field, cfg.binarize_threshold)), dag, cfg);
}

std::vector<InitialVertex> recovery_seeds(const DistanceField& field, const BinaryMask& skel,
                                          const LaneDag& dag, const InferenceConfig& cfg) {
  // Only skeleton pixels matter, so coverage is tested there rather than rendered.
  BinaryMask rest = skel;
  const auto lines = to_polylines(dag);
  if (!lines.empty()) {
    const SegmentIndex index(lines, cfg.recovery_cover_radius_px);
    for (Eigen::Index r = 0; r < rest.rows(); ++r) {
      for (Eigen::Index c = 0; c < rest.cols(); ++c) {
        if (rest(r, c) && std::isfinite(index.distance(Point(double(c), double(r))))) rest(r, c) = 0;
      }
    }
  }
  Grid<int> labels;
  const int n = label_components(rest, labels);
  std::vector<int> sizes(n + 1, 0);
  for (Eigen::Index i = 0; i < labels.size(); ++i) ++sizes[labels.data()[i]];
  BinaryMask big = BinaryMask::Zero(rest.rows(), rest.cols());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const int l = labels.data()[i];
    big.data()[i] = l != 0 && sizes[l] >= cfg.recovery_min_component_px;
  }
  auto ends = endpoints_with_tangent(big);
  std::stable_sort(ends.begin(), ends.end(), [](const Endpoint& a, const Endpoint& b) {
    return a.pixel.x() != b.pixel.x() ? a.pixel.x() < b.pixel.x() : a.pixel.y() < b.pixel.y();
  });
  return snap_and_dedup(field, ends);
}

InferenceResult recover(const DistanceField& field, const HeaderSuite& headers, const LaneDag& dag,
                        const InferenceConfig& cfg) {
  cfg.validate();
  return continue_from(field, headers, dag, recovery_seeds(field, dag, cfg), cfg);
}

InferenceResult infer(const DistanceField& field, const HeaderSuite& headers,
                      const InferenceConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  const BinaryMask skel = skeletonize(binarize(field, cfg.binarize_threshold));
  auto init = initial_vertices(field, skel);
  for (auto it = opt.drop_initial.rbegin(); it != opt.drop_initial.rend(); ++it) {
    if (*it >= init.size()) {
      throw ParameterError("cannot drop initial vertex " + std::to_string(*it) + " of " +
                           std::to_string(init.size()));
    }
    init.erase(init.begin() + static_cast<std::ptrdiff_t>(*it));
  }
  InferenceResult found = discover(field, headers, init, cfg);
  if (!opt.recover || found.budget_exceeded) return found;
  return continue_from(field, headers, found.dag, recovery_seeds(field, skel, found.dag, cfg), cfg);
}

namespace {

double vertex_terms(const LaneDag& dag, const HeaderSuite& headers, const HeaderContext& ctx,
                    VertexId v) {
  const DagVertex& vx = dag.vertex(v);
  return headers.direction_log_prob(ctx, vx.theta) +
         headers.position_log_prob(ctx, vx.theta, vx.position) +
         headers.state_log_probs(ctx, vx.theta)[static_cast<int>(vx.state)];
}

void require_inside(const LaneDag& dag, const DistanceField& field) {
  for (const auto& v : dag.vertices()) {
    if (!field.contains(v.position)) {
      throw DomainError("vertex " + std::to_string(v.id) + " lies outside the field");
    }
  }
}

}  // namespace

double dag_log_score(const LaneDag& dag, const HeaderSuite& headers, const DistanceField& field) {
  if (dag.empty()) return 0.0;
  require_valid(dag);
  require_inside(dag, field);
  const TraceBook book =
      TraceBook::replay(dag, field.height(), field.width(), headers.config().merge_radius_px);
  double total = 0.0;
  for (const auto& v : dag.vertices()) {
    if (v.parent) total += vertex_terms(dag, headers, book.context_of(dag, v.id, field), v.id);
  }
  return total;
}

double relabel_score_delta(const LaneDag& dag, const HeaderSuite& headers,
                           const DistanceField& field, const TraceBook& book, VertexId v,
                           VertexState state) {
  const DagVertex& vx = dag.vertex(v);
  if (state == vx.state) return 0.0;
  double delta = 0.0;
  if (vx.parent) {
    const auto probs = headers.state_log_probs(book.context_of(dag, v, field), vx.theta);
    delta += probs[static_cast<int>(state)] - probs[static_cast<int>(vx.state)];
  }
  for (VertexId c : vx.children) {
    delta += vertex_terms(dag, headers, book.context_of(dag, c, field, state), c) -
             vertex_terms(dag, headers, book.context_of(dag, c, field), c);
  }
  return delta;
}

}  // namespace lanegraph
