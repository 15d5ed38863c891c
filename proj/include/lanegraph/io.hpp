#pragma once

// On-disk formats: canonical JSON, 16-bit grayscale PNG rasters with a JSON
// sidecar, 8-bit RGB PNG figures and the LaneDag JSON schema.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanegraph/dag.hpp"
#include "lanegraph/raster.hpp"

namespace lanegraph {

using Json = nlohmann::json;

// Compact, keys sorted, doubles printed with 17 significant digits.
std::string canonical_json(const Json& j);

Json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const Json& j);

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}
  std::uint8_t* at(int r, int c) { return &data[(static_cast<std::size_t>(r) * width + c) * 3]; }
  const std::uint8_t* at(int r, int c) const {
    return &data[(static_cast<std::size_t>(r) * width + c) * 3];
  }
};

// Values in [0, 1] quantised to 16 bits. Compression settings are pinned so equal
// inputs give equal bytes.
void write_png16(const std::filesystem::path& path, const RealGrid& unit_values);
RealGrid read_png16(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png_rgb(const std::filesystem::path& path);

// Raster PNG plus "<stem>.json" sidecar {"height", "resolution_m_per_px", "width"}.
std::filesystem::path sidecar_path(const std::filesystem::path& png);
void write_raster(const std::filesystem::path& png, const IntensityRaster& raster);
IntensityRaster read_raster(const std::filesystem::path& png);
// Fields are stored as value / 10 in the same format.
void write_field(const std::filesystem::path& png, const DistanceField& field,
                 double resolution_m_per_px = 0.05);
DistanceField read_field(const std::filesystem::path& png);

Json dag_to_json(const LaneDag& dag);
LaneDag dag_from_json(const Json& j);
std::vector<Polyline> polylines_from_json(const Json& j);
Json polylines_to_json(const std::vector<Polyline>& lines);

}  // namespace lanegraph
