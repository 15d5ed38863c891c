#include "lanegraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "lanegraph/errors.hpp"
#include "lanegraph/io.hpp"

namespace lanegraph {
namespace fs = std::filesystem;
namespace {

constexpr double kMarginPx = 60.0;
constexpr double kStationPx = 50.0;
constexpr double kStationClearPx = 10.0;
constexpr double kBranchVisiblePx = 2.5;

constexpr double kStrokeValue = 0.9;
constexpr double kRoadValue = 0.35;
constexpr double kBackgroundValue = 0.05;

// mt19937_64 is fully specified by the standard; the distributions are not, so the
// uniform and normal draws below are written out.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

double normal01(std::mt19937_64& g) {
  const double u1 = 1.0 - uniform01(g);  // (0, 1]
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

struct Ramp {
  double x0;
  double length;
};

struct Boundary {
  int slot = 0;
  double x_begin = 0.0;
  double x_end = 0.0;
  std::optional<Ramp> born;   // peeled off the boundary one slot up
  std::optional<Ramp> dying;  // folds into the boundary one slot up
  int parent = -1;            // boundary it forked from
  std::vector<double> fork_points;
};

struct Layout {
  double width = 0.0;
  double lane = 0.0;
  double y_top = 0.0;
  double amplitude = 0.0;
  double wavelength = 1.0;
  double phase = 0.0;

  double base(int slot, double x) const {
    return y_top + slot * lane + amplitude * std::sin(2.0 * std::numbers::pi * x / wavelength + phase);
  }
  double y(const Boundary& b, double x) const {
    if (b.born && x < b.born->x0 + b.born->length) {
      return base(b.slot - 1, x) + lane * smoothstep((x - b.born->x0) / b.born->length);
    }
    if (b.dying && x >= b.dying->x0) {
      return base(b.slot - 1, x) + lane * (1.0 - smoothstep((x - b.dying->x0) / b.dying->length));
    }
    return base(b.slot, x);
  }
  double offset(const Boundary& b, double x) const {
    return b.born ? lane * smoothstep((x - b.born->x0) / b.born->length) : lane;
  }
};

std::vector<Boundary> build_boundaries(const SceneSpec& spec, double width, int& max_slot) {
  std::vector<Boundary> bs;
  std::vector<int> active;
  for (int k = 0; k <= spec.num_lanes; ++k) {
    bs.push_back({k, 0.0, width - 1.0, std::nullopt, std::nullopt, -1, {}});
    active.push_back(k);
  }
  max_slot = spec.num_lanes;
  for (const auto& ev : spec.events) {
    const Ramp ramp{ev.position_m / spec.resolution_m_per_px,
                    ev.ramp_length_m / spec.resolution_m_per_px};
    const int bottom = active.back();
    if (ev.kind == EventKind::Fork) {
      Boundary nb{bs[bottom].slot + 1, ramp.x0, width - 1.0, ramp, std::nullopt, bottom, {}};
      bs[bottom].fork_points.push_back(ramp.x0);
      active.push_back(static_cast<int>(bs.size()));
      max_slot = std::max(max_slot, nb.slot);
      bs.push_back(nb);
    } else {
      bs[bottom].dying = ramp;
      bs[bottom].x_end = ramp.x0 + ramp.length;
      active.pop_back();
    }
  }
  return bs;
}

// Stations along one boundary: a 50-px grid plus the forced points (start, fork
// points, end), with grid stations too close to a forced one dropped. A branch
// starts at its first grid station where it has visibly left its parent.
std::vector<double> stations(const Layout& L, const Boundary& b) {
  std::vector<double> forced = b.fork_points;
  forced.push_back(b.x_end);
  if (!b.born) forced.push_back(b.x_begin);
  std::vector<double> xs = forced;
  for (double x = 0.0; x < b.x_end; x += kStationPx) {
    if (b.born && (x <= b.born->x0 || L.offset(b, x) < kBranchVisiblePx)) continue;
    const bool clear = std::none_of(forced.begin(), forced.end(), [&](double f) {
      return std::abs(f - x) < kStationClearPx;
    });
    if (clear) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

LaneDag build_dag(const Layout& L, const std::vector<Boundary>& bs) {
  LaneDag dag;
  // fork vertex id per (boundary, fork point)
  std::vector<std::vector<std::pair<double, VertexId>>> fork_ids(bs.size());
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const Boundary& b = bs[i];
    const auto xs = stations(L, b);
    auto at = [&](double x) { return Point(x, L.y(b, x)); };
    std::size_t k = 0;
    VertexId prev;
    if (b.born) {
      const auto& parent_forks = fork_ids[static_cast<std::size_t>(b.parent)];
      const auto it = std::find_if(parent_forks.begin(), parent_forks.end(),
                                   [&](const auto& f) { return f.first == b.born->x0; });
      prev = it->second;
    } else {
      prev = dag.add_root(at(xs[0]), heading_between(at(xs[0]), at(xs[1])));
      k = 1;
    }
    for (; k < xs.size(); ++k) {
      const double x = xs[k];
      VertexState state = VertexState::Normal;
      if (std::find(b.fork_points.begin(), b.fork_points.end(), x) != b.fork_points.end()) {
        state = VertexState::Fork;
      } else if (b.dying && x == b.x_end) {
        state = VertexState::Terminate;
      }
      const Point p = at(x);
      const VertexId id = dag.add_child(prev, p, heading_between(dag.vertex(prev).position, p), state);
      if (state == VertexState::Fork) fork_ids[i].emplace_back(x, id);
      prev = id;
    }
  }
  return dag;
}

IntensityRaster render(const SceneSpec& spec, const std::vector<Polyline>& lines, Eigen::Index rows,
                       Eigen::Index cols) {
  const BinaryMask core = rasterize_polylines(lines, rows, cols);
  IntensityRaster raster;
  raster.resolution_m_per_px = spec.resolution_m_per_px;
  raster.values = RealGrid::Constant(rows, cols, kBackgroundValue);
  for (Eigen::Index c = 0; c < cols; ++c) {
    Eigen::Index lo = -1, hi = -1;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!core(r, c)) continue;
      if (lo < 0) lo = r;
      hi = r;
    }
    if (lo >= 0) raster.values.col(c).segment(lo, hi - lo + 1).setConstant(kRoadValue);
  }
  // Stroke: every pixel within distance 1 of the 1-px centre line.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!core(r, c)) continue;
      raster.values(r, c) = kStrokeValue;
      if (r > 0) raster.values(r - 1, c) = kStrokeValue;
      if (r + 1 < rows) raster.values(r + 1, c) = kStrokeValue;
      if (c > 0) raster.values(r, c - 1) = kStrokeValue;
      if (c + 1 < cols) raster.values(r, c + 1) = kStrokeValue;
    }
  }
  const NoiseSpec& n = spec.noise;
  if (n.gaussian_sigma > 0.0 || n.dropout_prob > 0.0) {
    auto rng = make_stream(spec.seed, 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v = raster.values(r, c) + n.gaussian_sigma * normal01(rng);
        if (uniform01(rng) < n.dropout_prob) v = 0.0;  // missing return
        raster.values(r, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return raster;
}

Json spec_to_json(const SceneSpec& spec) {
  return {{"events", format_events(spec.events)},
          {"lane_width_m", spec.lane_width_m},
          {"length_m", spec.length_m},
          {"noise", {{"dropout_prob", spec.noise.dropout_prob},
                     {"gaussian_sigma", spec.noise.gaussian_sigma}}},
          {"num_lanes", spec.num_lanes},
          {"resolution_m_per_px", spec.resolution_m_per_px},
          {"seed", spec.seed}};
}

}  // namespace

void SceneSpec::validate() const {
  if (num_lanes < 2) throw SpecError("num_lanes must be at least 2");
  if (!(length_m > 0.0) || !(lane_width_m > 0.0) || !(resolution_m_per_px > 0.0)) {
    throw SpecError("length, lane width and resolution must be positive");
  }
  if (!(noise.gaussian_sigma >= 0.0) || !(noise.dropout_prob >= 0.0 && noise.dropout_prob <= 1.0)) {
    throw SpecError("noise sigma must be >= 0 and dropout in [0, 1]");
  }
  const double width = std::round(length_m / resolution_m_per_px);
  int boundaries = num_lanes + 1;
  double free_from = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const int idx = static_cast<int>(i);
    if (i > 0 && e.position_m < events[i - 1].position_m) {
      throw SpecError("events must be sorted by position", idx);
    }
    if (!(e.ramp_length_m > 0.0)) throw SpecError("ramp length must be positive", idx);
    const double x0 = e.position_m / resolution_m_per_px;
    const double x1 = x0 + e.ramp_length_m / resolution_m_per_px;
    if (!(x0 > 0.0) || x1 > width - 1.0) {
      throw SpecError("event ramp leaves the scene", idx);
    }
    if (x0 < free_from) throw SpecError("event ramp overlaps the previous one", idx);
    free_from = x1;
    if (e.kind == EventKind::Merge) {
      if (boundaries < 3) throw SpecError("merge would leave no lane", idx);
      --boundaries;
    } else {
      ++boundaries;
    }
  }
}

GroundTruthScene generate(const SceneSpec& spec) {
  spec.validate();
  auto rng = make_stream(spec.seed, 0);
  Layout L;
  L.width = std::round(spec.length_m / spec.resolution_m_per_px);
  L.lane = spec.lane_width_m / spec.resolution_m_per_px;
  L.amplitude = (0.5 + 2.5 * uniform01(rng)) / spec.resolution_m_per_px;
  L.wavelength = (200.0 + 200.0 * uniform01(rng)) / spec.resolution_m_per_px;
  L.phase = 2.0 * std::numbers::pi * uniform01(rng);

  int max_slot = 0;
  const auto bs = build_boundaries(spec, L.width, max_slot);
  const double span = 2.0 * kMarginPx + max_slot * L.lane;
  if (span + 2.0 * L.amplitude > spec.max_height_px - 1) {
    L.amplitude = 0.5 * (spec.max_height_px - 1 - span);
    if (L.amplitude < 0.0) {
      throw SpecError("scene needs " + std::to_string(static_cast<int>(std::ceil(span))) +
                      " px of height, more than the " + std::to_string(spec.max_height_px) +
                      " px limit");
    }
  }
  L.y_top = kMarginPx + L.amplitude;
  const auto rows = static_cast<Eigen::Index>(std::ceil(span + 2.0 * L.amplitude)) + 1;
  const auto cols = static_cast<Eigen::Index>(L.width);

  GroundTruthScene scene;
  scene.gt_dag = build_dag(L, bs);
  require_valid(scene.gt_dag);
  scene.gt_polylines = to_polylines(scene.gt_dag);
  scene.raster = render(spec, scene.gt_polylines, rows, cols);
  return scene;
}

std::vector<SceneEvent> parse_events(const std::string& text) {
  std::vector<SceneEvent> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    const auto at = token.find('@');
    if (at == std::string::npos) throw ParameterError("event token '" + token + "' lacks '@'");
    SceneEvent e;
    const std::string kind = token.substr(0, at);
    if (kind == "fork") {
      e.kind = EventKind::Fork;
    } else if (kind == "merge") {
      e.kind = EventKind::Merge;
    } else {
      throw ParameterError("event token '" + token + "': unknown kind '" + kind + "'");
    }
    std::string rest = token.substr(at + 1);
    const auto colon = rest.find(':');
    try {
      std::size_t used = 0;
      e.position_m = std::stod(rest.substr(0, colon), &used);
      if (used != rest.substr(0, colon).size()) throw std::invalid_argument("trailing");
      if (colon != std::string::npos) {
        const std::string ramp = rest.substr(colon + 1);
        e.ramp_length_m = std::stod(ramp, &used);
        if (used != ramp.size()) throw std::invalid_argument("trailing");
      }
    } catch (const std::logic_error&) {
      throw ParameterError("event token '" + token + "' has a malformed number");
    }
    out.push_back(e);
  }
  return out;
}

std::string format_events(const std::vector<SceneEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    if (!out.empty()) out += ',';
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s@%.17g:%.17g", e.kind == EventKind::Fork ? "fork" : "merge",
                  e.position_m, e.ramp_length_m);
    out += buf;
  }
  return out;
}

void scene_to_disk(const GroundTruthScene& scene, const fs::path& dir, const SceneSpec& spec) {
  if (!fs::is_directory(dir)) throw IoError("scene directory " + dir.string() + " does not exist");
  write_raster(dir / "raster.png", scene.raster);
  write_json(dir / "gt.json", dag_to_json(scene.gt_dag));
  write_json(dir / "manifest.json",
             {{"files", {"gt.json", "raster.json", "raster.png"}}, {"spec", spec_to_json(spec)}});
}

GroundTruthScene scene_from_disk(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("scene directory " + dir.string() + " does not exist");
  GroundTruthScene scene;
  scene.raster = read_raster(dir / "raster.png");
  const Json gt = read_json(dir / "gt.json");
  scene.gt_dag = dag_from_json(gt);
  scene.gt_polylines = polylines_from_json(gt);
  return scene;
}

}  // namespace lanegraph
