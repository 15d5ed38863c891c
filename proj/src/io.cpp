#include "lanegraph/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lanegraph/errors.hpp"

namespace lanegraph {
namespace fs = std::filesystem;
namespace {

void emit(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: keys already sorted
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        emit(it.value(), out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        emit(j[i], out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) throw NumericError("cannot write a non-finite number to JSON");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

fs::path temp_sibling(const fs::path& path) { return fs::path(path.string() + ".tmp"); }

struct PngWriter {
  explicit PngWriter(const fs::path& path) : path(path) {
    file = std::fopen(path.c_str(), "wb");
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!info) throw IoError("libpng initialisation failed for " + path.string());
  }
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (file) std::fclose(file);
  }
  fs::path path;
  std::FILE* file = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
};

void write_png(const fs::path& path, int width, int height, int depth, int color,
               const std::vector<png_bytep>& rows) {
  const fs::path tmp = temp_sibling(path);
  {
    PngWriter w(tmp);
    if (setjmp(png_jmpbuf(w.png))) throw IoError("libpng failed writing " + path.string());
    png_init_io(w.png, w.file);
    png_set_compression_level(w.png, 6);
    png_set_filter(w.png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_set_IHDR(w.png, w.info, width, height, depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_write_image(w.png, const_cast<png_bytepp>(rows.data()));
    png_write_end(w.png, nullptr);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

struct PngImage {
  int width = 0, height = 0, depth = 0, color = 0;
  std::vector<std::uint8_t> bytes;
  std::size_t row_bytes = 0;
};

PngImage read_png(const fs::path& path) {
  std::FILE* file = std::fopen(path.c_str(), "rb");
  if (!file) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  PngImage img;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(file);
    throw IoError("not a readable PNG: " + path.string());
  }
  png_init_io(png, file);
  png_read_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.depth = png_get_bit_depth(png, info);
  img.color = png_get_color_type(png, info);
  img.row_bytes = png_get_rowbytes(png, info);
  img.bytes.resize(img.row_bytes * img.height);
  std::vector<png_bytep> rows(img.height);
  for (int r = 0; r < img.height; ++r) rows[r] = img.bytes.data() + r * img.row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(file);
  return img;
}

}  // namespace

std::string canonical_json(const Json& j) {
  std::string out;
  emit(j, out);
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("short write to " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const Json& j) { write_text_atomic(path, canonical_json(j) + "\n"); }

void write_png16(const fs::path& path, const RealGrid& unit_values) {
  const int h = static_cast<int>(unit_values.rows()), w = static_cast<int>(unit_values.cols());
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w * 2);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = std::clamp(unit_values(r, c), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      const std::size_t i = (static_cast<std::size_t>(r) * w + c) * 2;
      bytes[i] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
      bytes[i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
  }
  std::vector<png_bytep> rows(h);
  for (int r = 0; r < h; ++r) rows[r] = bytes.data() + static_cast<std::size_t>(r) * w * 2;
  write_png(path, w, h, 16, PNG_COLOR_TYPE_GRAY, rows);
}

RealGrid read_png16(const fs::path& path) {
  const PngImage img = read_png(path);
  if (img.depth != 16 || img.color != PNG_COLOR_TYPE_GRAY) {
    throw IoError(path.string() + " is not a 16-bit grayscale PNG");
  }
  RealGrid out(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    const std::uint8_t* row = img.bytes.data() + r * img.row_bytes;
    for (int c = 0; c < img.width; ++c) {
      out(r, c) = ((row[2 * c] << 8) | row[2 * c + 1]) / 65535.0;
    }
  }
  return out;
}

void write_png_rgb(const fs::path& path, const RgbImage& image) {
  std::vector<png_bytep> rows(image.height);
  for (int r = 0; r < image.height; ++r) {
    rows[r] = const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(r) * image.width * 3);
  }
  write_png(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

RgbImage read_png_rgb(const fs::path& path) {
  const PngImage img = read_png(path);
  if (img.depth != 8 || img.color != PNG_COLOR_TYPE_RGB) {
    throw IoError(path.string() + " is not an 8-bit RGB PNG");
  }
  RgbImage out(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    std::copy_n(img.bytes.data() + r * img.row_bytes, img.width * 3, out.at(r, 0));
  }
  return out;
}

fs::path sidecar_path(const fs::path& png) {
  fs::path p = png;
  p.replace_extension(".json");
  return p;
}

void write_raster(const fs::path& png, const IntensityRaster& raster) {
  write_png16(png, raster.values);
  write_json(sidecar_path(png), Json{{"height", raster.height()},
                                     {"resolution_m_per_px", raster.resolution_m_per_px},
                                     {"width", raster.width()}});
}

IntensityRaster read_raster(const fs::path& png) {
  IntensityRaster raster;
  raster.values = read_png16(png);
  const fs::path side = sidecar_path(png);
  if (fs::exists(side)) {
    const Json meta = read_json(side);
    raster.resolution_m_per_px = meta.value("resolution_m_per_px", 0.05);
    if (meta.value("height", raster.height()) != raster.height() ||
        meta.value("width", raster.width()) != raster.width()) {
      throw IoError("sidecar " + side.string() + " disagrees with the PNG size");
    }
  }
  return raster;
}

void write_field(const fs::path& png, const DistanceField& field, double resolution_m_per_px) {
  IntensityRaster scaled{field.values / kFieldMax, resolution_m_per_px};
  write_raster(png, scaled);
}

DistanceField read_field(const fs::path& png) {
  DistanceField f;
  f.values = read_raster(png).values * kFieldMax;
  return f;
}

Json dag_to_json(const LaneDag& dag) {
  Json vertices = Json::array();
  for (const auto& v : dag.vertices()) {
    vertices.push_back({{"children", v.children},
                        {"id", v.id},
                        {"parent", v.parent ? Json(*v.parent) : Json(nullptr)},
                        {"state", std::string(to_string(v.state))},
                        {"theta", v.theta.radians()},
                        {"x", v.position.x()},
                        {"y", v.position.y()}});
  }
  const auto lines = validate(dag).empty() ? to_polylines(dag) : std::vector<Polyline>{};
  return {{"polylines", polylines_to_json(lines)}, {"roots", dag.roots()}, {"vertices", vertices}};
}

Json polylines_to_json(const std::vector<Polyline>& lines) {
  Json out = Json::array();
  for (const auto& p : lines) {
    Json pts = Json::array();
    for (const auto& q : p.points()) pts.push_back({q.x(), q.y()});
    out.push_back({{"id", p.id()}, {"points", pts}});
  }
  return out;
}

LaneDag dag_from_json(const Json& j) {
  try {
    std::vector<DagVertex> vertices;
    for (const auto& jv : j.at("vertices")) {
      DagVertex v;
      v.id = jv.at("id").get<VertexId>();
      v.position = Point(jv.at("x").get<double>(), jv.at("y").get<double>());
      v.theta = Angle(jv.at("theta").get<double>());
      v.state = parse_vertex_state(jv.at("state").get<std::string>());
      if (!jv.at("parent").is_null()) v.parent = jv.at("parent").get<VertexId>();
      v.children = jv.at("children").get<std::vector<VertexId>>();
      vertices.push_back(std::move(v));
    }
    return LaneDag(std::move(vertices), j.at("roots").get<std::vector<VertexId>>());
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed lane DAG JSON: ") + e.what());
  }
}

std::vector<Polyline> polylines_from_json(const Json& j) {
  std::vector<Polyline> out;
  try {
    const Json& arr = j.is_object() ? j.at("polylines") : j;
    for (const auto& jp : arr) {
      std::vector<Point> pts;
      for (const auto& q : jp.at("points")) pts.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
      out.emplace_back(std::move(pts), jp.at("id").get<int>());
    }
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed polyline JSON: ") + e.what());
  }
  return out;
}

}  // namespace lanegraph
