#pragma once

// Procedural highway scenes: straight-ish lane boundaries with a gentle lateral
// sinusoid, forks that peel a new boundary off the bottom-most one, and merges that
// fold the bottom-most boundary into its neighbour. Rendered as a noisy intensity
// raster together with the ground-truth DAG.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lanegraph/dag.hpp"
#include "lanegraph/raster.hpp"

namespace lanegraph {

enum class EventKind { Fork, Merge };

struct SceneEvent {
  EventKind kind = EventKind::Fork;
  double position_m = 0.0;
  double ramp_length_m = 80.0;
};

struct NoiseSpec {
  double gaussian_sigma = 0.0;
  double dropout_prob = 0.0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int num_lanes = 3;
  double length_m = 400.0;
  double lane_width_m = 3.7;
  double resolution_m_per_px = 0.05;
  std::vector<SceneEvent> events;
  NoiseSpec noise;
  int max_height_px = 1200;

  // Throws SpecError (with the event index where one is at fault).
  void validate() const;
};

struct GroundTruthScene {
  IntensityRaster raster;
  LaneDag gt_dag;
  std::vector<Polyline> gt_polylines;
};

/// Deterministic in spec (seed included). Geometry draws come from stream 0 of the
/// seed, pixel noise from stream 1.
GroundTruthScene generate(const SceneSpec& spec);

// Parses "fork@150,merge@300" (positions in metres, optional ":ramp" suffix in
// metres, e.g. "fork@150:60"). Throws ParameterError naming the bad token.
std::vector<SceneEvent> parse_events(const std::string& text);
std::string format_events(const std::vector<SceneEvent>& events);

// raster.png + raster.json + gt.json, and manifest.json listing those three files.
// The directory must already exist.
void scene_to_disk(const GroundTruthScene& scene, const std::filesystem::path& dir,
                   const SceneSpec& spec);
GroundTruthScene scene_from_disk(const std::filesystem::path& dir);

}  // namespace lanegraph
