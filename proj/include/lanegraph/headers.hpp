#pragma once

// Conditional distributions consumed by greedy discovery:
//   direction  p(theta_i | theta_parent, s_parent, x_parent, D)
//   position   p(x_i     | theta_i, s_parent, x_parent, D)
//   state      p(s_i     | theta_i, s_parent, x_parent, D)
// HeaderSuite is the pluggable contract; DistanceFieldOracle is the deterministic
// implementation that reads everything off the distance field.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "lanegraph/dag.hpp"
#include "lanegraph/geom.hpp"
#include "lanegraph/raster.hpp"

namespace lanegraph {

/// Per-pixel record of traced boundary segments: the label of the chain that first
/// stamped the pixel and the stamping time (vertex id). Queries take a time horizon
/// and only see stamps strictly older than it, so a scorer can reproduce the mask
/// exactly as it looked when any given vertex was predicted.
class ClaimedMask {
 public:
  static constexpr int kFree = 0;

  ClaimedMask() = default;
  ClaimedMask(Eigen::Index rows, Eigen::Index cols);

  Eigen::Index rows() const { return labels_.rows(); }
  Eigen::Index cols() const { return labels_.cols(); }

  void stamp_segment(const Point& a, const Point& b, int label, std::int64_t time);

  // Label visible at (row, col) under `horizon`, or kFree.
  int label_at(Eigen::Index row, Eigen::Index col, std::int64_t horizon) const {
    return times_(row, col) < horizon ? labels_(row, col) : kFree;
  }

  // True if a pixel within `radius` of p carries a label other than kFree, `own`
  // and `ignore`.
  bool claimed_by_other(const Point& p, double radius, int own, int ignore,
                        std::int64_t horizon) const;
  // Distance from p to the nearest pixel labelled `label`, searched out to `radius`;
  // +inf if none.
  double distance_to_label(const Point& p, int label, double radius,
                           std::int64_t horizon) const;
  std::size_t claimed_count(std::int64_t horizon = std::numeric_limits<std::int64_t>::max()) const;

 private:
  Grid<int> labels_;
  Grid<std::int64_t> times_;
};

/// Conditioning set for one prediction step.
struct HeaderContext {
  Point parent_position = Point::Zero();
  Angle parent_angle;
  VertexState parent_state = VertexState::Normal;
  const DistanceField* field = nullptr;
  const ClaimedMask* claimed = nullptr;
  int own_label = ClaimedMask::kFree;
  // Chain whose pixels are invisible to merge detection (the chain a fork branch
  // left, until the branch has moved clear of it).
  int ignore_label = ClaimedMask::kFree;
  std::int64_t horizon = std::numeric_limits<std::int64_t>::max();
  // Direction already taken out of a fork; excluded when the queued branch of a
  // Fork parent is expanded.
  std::optional<Angle> consumed_branch;
};

struct HeaderConfig {
  int step_px = 50;
  int roi_h = 100;
  int roi_w = 100;
  // Candidate count over the half circle in front of the parent.
  int angle_samples = 181;
  double fork_sep_min_rad = 0.05;
  double merge_radius_px = 10.0;
  // Binarisation level for the local ridge skeleton read by the state oracle.
  double ridge_threshold = 7.0;

  // Throws ParameterError on a broken invariant.
  void validate() const;
};

struct DirectionPrediction {
  Angle angle;
  double log_prob = 0.0;
  bool lost_track = false;  // every candidate scored zero
};

struct PositionPrediction {
  Point position = Point::Zero();
  double log_prob = 0.0;
  bool exit_image = false;  // RoI centre outside the field
};

struct StatePrediction {
  VertexState state = VertexState::Normal;
  std::array<double, kStateCount> log_probs{};
};

class HeaderSuite {
 public:
  explicit HeaderSuite(HeaderConfig config) : config_(config) { config_.validate(); }
  virtual ~HeaderSuite() = default;

  const HeaderConfig& config() const { return config_; }

  virtual DirectionPrediction predict_direction(const HeaderContext& ctx) const = 0;
  virtual PositionPrediction predict_position(const HeaderContext& ctx, Angle angle) const = 0;
  virtual StatePrediction predict_state(const HeaderContext& ctx, Angle angle) const = 0;

  // Probability evaluations of given outcomes, used for scoring whole graphs.
  virtual double direction_log_prob(const HeaderContext& ctx, Angle angle) const = 0;
  virtual double position_log_prob(const HeaderContext& ctx, Angle angle,
                                   const Point& position) const = 0;
  virtual std::array<double, kStateCount> state_log_probs(const HeaderContext& ctx,
                                                          Angle angle) const {
    return predict_state(ctx, angle).log_probs;
  }

 private:
  HeaderConfig config_;
};

// Intermediate quantities of the state oracle, exposed for tests and diagnostics.
struct RidgeReading {
  bool found = false;       // a ridge passes near the RoI centre
  int far_branches = 0;     // distinct ridge branches crossing the far edge
  int junction_col = -1;    // first column from which >= 2 branches persist to the far edge,
                            // when a single branch enters at the near edge
  bool ridge_ends = false;  // the ridge stops inside the RoI, away from image borders
  bool merge = false;       // advanced position is next to another chain's pixels
};

class DistanceFieldOracle final : public HeaderSuite {
 public:
  static constexpr double kStateEpsilon = 1e-6;

  explicit DistanceFieldOracle(HeaderConfig config = {}) : HeaderSuite(config) {}

  DirectionPrediction predict_direction(const HeaderContext& ctx) const override;
  PositionPrediction predict_position(const HeaderContext& ctx, Angle angle) const override;
  StatePrediction predict_state(const HeaderContext& ctx, Angle angle) const override;

  double direction_log_prob(const HeaderContext& ctx, Angle angle) const override;
  double position_log_prob(const HeaderContext& ctx, Angle angle,
                           const Point& position) const override;

  RotatedRoi roi_for(const HeaderContext& ctx, Angle angle) const;
  RidgeReading read_ridge(const HeaderContext& ctx, Angle angle) const;

  // Candidate angles and their unnormalised ray scores; excluded candidates are dropped.
  struct Candidates {
    std::vector<Angle> angles;
    std::vector<double> scores;
  };
  Candidates direction_candidates(const HeaderContext& ctx) const;
  // Position logits over the RoI cells: the field sampled on the RoI, with cells near
  // the chain a fork branch is leaving set to 0.
  RealGrid position_logits(const HeaderContext& ctx, Angle angle) const;
};

}  // namespace lanegraph
