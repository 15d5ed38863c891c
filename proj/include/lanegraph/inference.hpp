#pragma once

// Greedy DAG discovery: a work queue of start vertices, each traced by repeatedly
// asking the header suite for direction, position and state of the next vertex.

#include <optional>
#include <vector>

#include "lanegraph/dag.hpp"
#include "lanegraph/headers.hpp"
#include "lanegraph/raster.hpp"

namespace lanegraph {

enum class LostTrackPolicy { Terminate };

struct InferenceConfig {
  int max_steps_per_boundary = 400;
  int max_total_vertices = 20000;
  double recovery_cover_radius_px = 20.0;
  int recovery_min_component_px = 40;
  double binarize_threshold = 4.0;
  LostTrackPolicy lost_track_policy = LostTrackPolicy::Terminate;

  void validate() const;
};

struct InitialVertex {
  Point position = Point::Zero();
  Angle angle;
  VertexState state = VertexState::Normal;
};

struct InferenceResult {
  LaneDag dag;
  bool budget_exceeded = false;
};

/// Chain bookkeeping shared by discovery and scoring. Every vertex belongs to a
/// chain label; a fork's second child opens a new chain that ignores its parent
/// chain until it has moved more than merge_radius away from it. Replaying a
/// finished DAG in id order rebuilds exactly the contexts discovery saw, because
/// vertex ids follow creation order and every stamp carries its vertex id as time.
class TraceBook {
 public:
  TraceBook(Eigen::Index rows, Eigen::Index cols, double merge_radius_px);

  static TraceBook replay(const LaneDag& dag, Eigen::Index rows, Eigen::Index cols,
                          double merge_radius_px);

  const ClaimedMask& claimed() const { return claimed_; }
  int label(VertexId v) const { return chains_.at(static_cast<std::size_t>(v)).label; }

  // Registers the most recently added vertex of `dag` and stamps its segment.
  void record(const LaneDag& dag, VertexId v);

  // Context for predicting a new child of `parent`. `secondary` marks the second
  // branch of a fork. The parent state is taken from the DAG unless overridden.
  HeaderContext child_context(const LaneDag& dag, VertexId parent, bool secondary,
                              const DistanceField& field,
                              std::optional<VertexState> parent_state = std::nullopt) const;
  // Context under which an existing vertex was predicted.
  HeaderContext context_of(const LaneDag& dag, VertexId v, const DistanceField& field,
                           std::optional<VertexState> parent_state = std::nullopt) const;
  // Context for the first child of a root that does not exist yet.
  HeaderContext root_context(const InitialVertex& init, VertexId next_id,
                             const DistanceField& field) const;

 private:
  struct Chain {
    int label = 0;
    int ignore_after = 0;  // ignore label handed to this vertex's children
  };
  bool is_secondary(const LaneDag& dag, VertexId v) const;

  ClaimedMask claimed_;
  std::vector<Chain> chains_;
  int next_label_ = 1;
  double merge_radius_px_;
};

/// Skeleton endpoints of the binarised field that can start a boundary: those in
/// the 200-px entry band on the left, plus those on the top or bottom border whose
/// ridge runs into the image. Positions are snapped to the field maximum nearby,
/// angles follow the skeleton away from the endpoint; ordered by (y, x).
std::vector<InitialVertex> initial_vertices(const DistanceField& field,
                                            double binarize_threshold = 4.0);
// Same, from an already thinned binarisation of the field.
std::vector<InitialVertex> initial_vertices(const DistanceField& field, const BinaryMask& skeleton);

InferenceResult discover(const DistanceField& field, const HeaderSuite& headers,
                         const std::vector<InitialVertex>& init, const InferenceConfig& cfg = {});

// Cells within `radius` px (point-to-segment) of the polylines of `dag`.
BinaryMask coverage_mask(const LaneDag& dag, Eigen::Index rows, Eigen::Index cols, double radius);

// Seeds from skeleton components the DAG does not cover, ordered by (x, y).
std::vector<InitialVertex> recovery_seeds(const DistanceField& field, const LaneDag& dag,
                                          const InferenceConfig& cfg);
std::vector<InitialVertex> recovery_seeds(const DistanceField& field, const BinaryMask& skeleton,
                                          const LaneDag& dag, const InferenceConfig& cfg);

/// Continues discovery from uncovered skeleton regions; the input DAG is kept as a
/// prefix of the result.
InferenceResult recover(const DistanceField& field, const HeaderSuite& headers, const LaneDag& dag,
                        const InferenceConfig& cfg = {});

struct PipelineOptions {
  bool recover = true;
  // Indices into the initial vertex list to leave out (for ablations).
  std::vector<std::size_t> drop_initial;
};

/// initial_vertices, discover and, if asked, recover, thinning the field only once.
InferenceResult infer(const DistanceField& field, const HeaderSuite& headers,
                      const InferenceConfig& cfg = {}, const PipelineOptions& opt = {});

/// Sum over non-root vertices of the direction, position and state log
/// probabilities of the header suite, under the contexts rebuilt by TraceBook.
/// Roots are given, not predicted, and contribute nothing.
double dag_log_score(const LaneDag& dag, const HeaderSuite& headers, const DistanceField& field);

// Change of dag_log_score when vertex v alone is relabelled to `state`. Only the terms
// of v and of its children depend on v's state, so only those are recomputed.
double relabel_score_delta(const LaneDag& dag, const HeaderSuite& headers,
                           const DistanceField& field, const TraceBook& book, VertexId v,
                           VertexState state);

}  // namespace lanegraph
