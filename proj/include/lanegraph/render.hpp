#pragma once

// Qualitative figures: the intensity raster in grey with polylines drawn on top.

#include <array>
#include <cstdint>
#include <vector>

#include "lanegraph/dag.hpp"
#include "lanegraph/io.hpp"
#include "lanegraph/raster.hpp"

namespace lanegraph {

using Rgb = std::array<std::uint8_t, 3>;

// Predictions cycle through warm colours, ground truth through cool ones.
Rgb prediction_color(int index);
Rgb ground_truth_color(int index);
inline constexpr Rgb kForkMarker{255, 0, 255};

struct Overlay {
  std::vector<Polyline> predictions;
  std::vector<Polyline> ground_truth;
  std::vector<Point> forks;  // drawn as 5x5 squares
};

// Grey copy of the raster, intensities clamped to [0, 1].
RgbImage grayscale(const IntensityRaster& raster);

/// Everything on one H x W image. GT goes down first, predictions over it, vertex
/// pixels (in their polyline colour) and fork markers last.
RgbImage render_overlay(const IntensityRaster& raster, const Overlay& overlay);

/// 2H x W: predictions and forks on the top half, ground truth on the bottom half.
RgbImage render_side_by_side(const IntensityRaster& raster, const Overlay& overlay);

// Fork vertex positions of a DAG, in id order.
std::vector<Point> fork_positions(const LaneDag& dag);

}  // namespace lanegraph
