// lanegraph command line: synth, infer, eval and render.
//
// Settings are resolved in this order, later wins: built-in defaults, the JSON file
// named by $TOOL_CONFIG, the file given with --config, explicit flags. Every command
// writes a run manifest next to its output.
//
// Exit codes: 0 success, 2 usage or input error, 3 internal invariant violation.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lanegraph/eval.hpp"
#include "lanegraph/inference.hpp"
#include "lanegraph/io.hpp"
#include "lanegraph/render.hpp"
#include "lanegraph/synth.hpp"

namespace fs = std::filesystem;
using namespace lanegraph;

#ifndef LANEGRAPH_VERSION
#define LANEGRAPH_VERSION "unknown"
#endif

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every key any command understands, with its default. A config file may carry keys
// for several commands; keys outside this table are rejected as typos.
Json all_defaults() {
  return {
      // synth
      {"seed", 0},
      {"lanes", 3},
      {"length_m", 400.0},
      {"lane_width_m", 3.7},
      {"resolution_m_per_px", 0.05},
      {"events", ""},
      {"noise_sigma", 0.0},
      {"dropout", 0.0},
      {"max_height_px", 1200},
      // infer
      {"step_px", 50},
      {"roi", "100x100"},
      {"angle_samples", 181},
      {"fork_sep_min_rad", 0.05},
      {"merge_radius_px", 10.0},
      {"ridge_threshold", 7.0},
      {"max_steps_per_boundary", 400},
      {"max_total_vertices", 20000},
      {"recovery_cover_radius_px", 20.0},
      {"recovery_min_component_px", 40},
      {"binarize_threshold", 4.0},
      {"intensity_threshold", 0.6},
      {"recover", true},
      {"drop_init", Json::array()},
      // eval
      {"thresholds", {2.0, 3.0, 5.0, 10.0}},
      {"topology_radius_px", 20.0},
      {"min_cover", 0.0},
      {"method", "ours"},
      // render
      {"layout", "overlay"},
      // all
      {"jobs", 1},
  };
}

class Settings {
 public:
  Settings() : values_(all_defaults()) {}

  void merge_file(const fs::path& path) {
    const Json j = read_json(path);
    if (!j.is_object()) throw UsageError(path.string() + ": config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (!values_.contains(key)) throw UsageError(path.string() + ": unknown config key '" + key + "'");
      values_[key] = value;
    }
  }

  // Registers --flag bound to `key`; the flag only overrides when given.
  template <typename T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& key,
                      const std::string& help) {
    auto slot = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *slot, help);
    pending_.push_back([this, slot, opt, key] {
      if (opt->count() > 0) values_[key] = *slot;
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& key,
                    const std::string& help) {
    auto slot = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *slot, help);
    pending_.push_back([this, slot, opt, key] {
      if (opt->count() > 0) values_[key] = *slot;
    });
    return opt;
  }

  void apply_flags() {
    for (auto& f : pending_) f();
  }

  template <typename T>
  T get(const std::string& key) const {
    try {
      return values_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw UsageError("config key '" + key + "' has the wrong type");
    }
  }
  const Json& values() const { return values_; }

 private:
  Json values_;
  std::vector<std::function<void()>> pending_;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are rethrown in
// index order so the reported error does not depend on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  if (threads == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::string> paths_to_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

// Keys that shape each command's output; the manifest records only these.
const std::vector<std::string>& command_keys(const std::string& command) {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"synth",
       {"seed", "lanes", "length_m", "lane_width_m", "resolution_m_per_px", "events", "noise_sigma",
        "dropout", "max_height_px"}},
      {"infer",
       {"step_px", "roi", "angle_samples", "fork_sep_min_rad", "merge_radius_px", "ridge_threshold",
        "max_steps_per_boundary", "max_total_vertices", "recovery_cover_radius_px",
        "recovery_min_component_px", "binarize_threshold", "intensity_threshold", "recover",
        "drop_init", "jobs"}},
      {"eval", {"thresholds", "topology_radius_px", "min_cover", "method", "jobs"}},
      {"render", {"layout"}},
  };
  return keys.at(command);
}

struct Run {
  std::string command;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Json manifest(const Settings& s, const Json& inputs, const Json& outputs) const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Json config = Json::object();
    for (const auto& key : command_keys(command)) config[key] = s.values().at(key);
    return {{"command", command},
            {"config", config},
            {"inputs", inputs},
            {"outputs", outputs},
            {"seed", command == "synth" ? s.values().at("seed") : Json(nullptr)},
            {"tool_version", LANEGRAPH_VERSION},
            {"wall_clock_seconds", secs}};
  }
};

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// ---------------------------------------------------------------------------------

struct SynthArgs {
  fs::path out;
};

void run_synth(const Settings& s, const SynthArgs& a) {
  Run run{"synth"};
  SceneSpec spec;
  spec.seed = s.get<std::uint64_t>("seed");
  spec.num_lanes = s.get<int>("lanes");
  spec.length_m = s.get<double>("length_m");
  spec.lane_width_m = s.get<double>("lane_width_m");
  spec.resolution_m_per_px = s.get<double>("resolution_m_per_px");
  spec.events = parse_events(s.get<std::string>("events"));
  spec.noise.gaussian_sigma = s.get<double>("noise_sigma");
  spec.noise.dropout_prob = s.get<double>("dropout");
  spec.max_height_px = s.get<int>("max_height_px");
  spec.validate();

  fs::create_directories(a.out);
  const GroundTruthScene scene = generate(spec);
  scene_to_disk(scene, a.out, spec);

  // Extend the scene manifest with how it was produced.
  Json m = read_json(a.out / "manifest.json");
  m.update(run.manifest(s, Json::object(), {"gt.json", "raster.json", "raster.png"}));
  write_json(a.out / "manifest.json", m);
}

// ---------------------------------------------------------------------------------

struct InferArgs {
  std::vector<fs::path> rasters;
  std::vector<fs::path> gts;
  std::vector<fs::path> dts;
  bool from_gt_dt = false;
  fs::path out;
};

HeaderConfig header_config(const Settings& s) {
  HeaderConfig h;
  h.step_px = s.get<int>("step_px");
  const std::string roi = s.get<std::string>("roi");
  const auto x = roi.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(roi);
    std::size_t used_h = 0, used_w = 0;
    h.roi_h = std::stoi(roi.substr(0, x), &used_h);
    h.roi_w = std::stoi(roi.substr(x + 1), &used_w);
    if (used_h != x || used_w != roi.size() - x - 1) throw std::invalid_argument(roi);
  } catch (const std::logic_error&) {
    throw UsageError("--roi expects HxW, e.g. 100x100, got '" + roi + "'");
  }
  h.angle_samples = s.get<int>("angle_samples");
  h.fork_sep_min_rad = s.get<double>("fork_sep_min_rad");
  h.merge_radius_px = s.get<double>("merge_radius_px");
  h.ridge_threshold = s.get<double>("ridge_threshold");
  h.validate();
  return h;
}

InferenceConfig inference_config(const Settings& s) {
  InferenceConfig c;
  c.max_steps_per_boundary = s.get<int>("max_steps_per_boundary");
  c.max_total_vertices = s.get<int>("max_total_vertices");
  c.recovery_cover_radius_px = s.get<double>("recovery_cover_radius_px");
  c.recovery_min_component_px = s.get<int>("recovery_min_component_px");
  c.binarize_threshold = s.get<double>("binarize_threshold");
  c.validate();
  return c;
}

void run_infer(const Settings& s, const InferArgs& a) {
  Run run{"infer"};
  const std::size_t n = a.rasters.size();
  if (a.from_gt_dt && !a.dts.empty()) throw UsageError("--from-gt-dt and --dt are exclusive");
  if (!a.dts.empty() && a.dts.size() != n) throw UsageError("give one --dt per --raster");
  if (!a.gts.empty() && a.gts.size() != n) throw UsageError("give one --gt per --raster");

  std::vector<fs::path> gts = a.gts;
  if (a.from_gt_dt && gts.empty()) {
    for (const auto& r : a.rasters) gts.push_back(r.parent_path() / "gt.json");
  }
  std::vector<fs::path> outs;
  if (n == 1) {
    outs.push_back(a.out);
  } else {
    for (std::size_t i = 0; i < n; ++i) outs.push_back(a.out / ("pred_" + std::to_string(i) + ".json"));
  }

  const DistanceFieldOracle oracle(header_config(s));
  const InferenceConfig cfg = inference_config(s);
  PipelineOptions opt;
  opt.recover = s.get<bool>("recover");
  opt.drop_initial = s.get<std::vector<std::size_t>>("drop_init");
  const double intensity_threshold = s.get<double>("intensity_threshold");

  std::vector<char> budget(n, 0);
  std::vector<std::size_t> vertex_counts(n, 0);
  parallel_for(n, s.get<int>("jobs"), [&](std::size_t i) {
    const IntensityRaster raster = read_raster(a.rasters[i]);
    DistanceField field;
    if (a.from_gt_dt) {
      const auto lines = polylines_from_json(read_json(gts[i]));
      field = inverse_threshold_dt(lines, raster.height(), raster.width());
    } else if (!a.dts.empty()) {
      field = read_field(a.dts[i]);
      if (field.height() != raster.height() || field.width() != raster.width()) {
        throw UsageError(a.dts[i].string() + ": field size differs from the raster");
      }
    } else {
      field = field_from_intensity(raster, intensity_threshold);
    }
    const InferenceResult res = infer(field, oracle, cfg, opt);
    require_valid(res.dag);
    budget[i] = res.budget_exceeded;
    vertex_counts[i] = res.dag.size();
    ensure_parent(outs[i]);
    write_json(outs[i], dag_to_json(res.dag));
  });

  Json inputs = {{"rasters", paths_to_strings(a.rasters)},
                 {"field_source", a.from_gt_dt ? "gt" : (a.dts.empty() ? "intensity" : "dt")}};
  if (a.from_gt_dt) inputs["gt"] = paths_to_strings(gts);
  if (!a.dts.empty()) inputs["dt"] = paths_to_strings(a.dts);
  Json m = run.manifest(s, inputs, paths_to_strings(outs));
  m["budget_exceeded"] = Json::array();
  for (char b : budget) m["budget_exceeded"].push_back(b != 0);
  m["vertex_counts"] = vertex_counts;
  const fs::path where = n == 1 ? manifest_path(a.out) : a.out / "manifest.json";
  write_json(where, m);
  for (std::size_t i = 0; i < n; ++i) {
    if (budget[i]) std::cerr << a.rasters[i].string() << ": vertex budget exceeded, output is partial\n";
  }
}

// ---------------------------------------------------------------------------------

struct EvalArgs {
  std::vector<fs::path> preds;
  std::vector<fs::path> gts;
  fs::path out;
  fs::path csv;
};

Json report_to_json(const EvalReport& r, const std::vector<fs::path>& preds) {
  Json scores = Json::array();
  for (const auto& t : r.scores) {
    scores.push_back({{"f1", t.f1}, {"precision", t.precision}, {"recall", t.recall},
                      {"threshold", t.threshold}});
  }
  Json images = Json::array();
  for (std::size_t i = 0; i < r.images.size(); ++i) {
    const ImageScore& im = r.images[i];
    images.push_back({{"gt_hits", im.gt_hits},
                      {"gt_points", im.gt_points},
                      {"pred", preds[i].string()},
                      {"pred_hits", im.pred_hits},
                      {"pred_points", im.pred_points},
                      {"topology",
                       {{"assignments", im.topology.assignments},
                        {"correct_count", im.topology.correct_count},
                        {"fraction", im.topology.fraction},
                        {"gt_count", im.topology.gt_count}}}});
  }
  return {{"images", images},
          {"precision_undefined", r.precision_undefined},
          {"recall_undefined", r.recall_undefined},
          {"scores", scores},
          {"topology",
           {{"correct_count", r.topology.correct_count},
            {"fraction", r.topology.fraction},
            {"gt_count", r.topology.gt_count}}}};
}

void run_eval(const Settings& s, const EvalArgs& a) {
  Run run{"eval"};
  if (a.preds.size() != a.gts.size()) throw UsageError("give one --gt per --pred");
  const std::size_t n = a.preds.size();
  std::vector<PolylineSet> preds(n), gts(n);
  parallel_for(n, s.get<int>("jobs"), [&](std::size_t i) {
    preds[i] = polylines_from_json(read_json(a.preds[i]));
    gts[i] = polylines_from_json(read_json(a.gts[i]));
  });
  EvalOptions opt;
  opt.thresholds = s.get<std::vector<double>>("thresholds");
  opt.topology_radius_px = s.get<double>("topology_radius_px");
  opt.min_cover = s.get<double>("min_cover");
  if (!(opt.min_cover >= 0.0 && opt.min_cover <= 1.0)) throw UsageError("--min-cover must lie in [0, 1]");
  const EvalReport report = evaluate(preds, gts, opt);

  const fs::path csv = a.csv.empty() ? fs::path(a.out).replace_extension(".csv") : a.csv;
  ensure_parent(a.out);
  ensure_parent(csv);
  write_json(a.out, report_to_json(report, a.preds));
  write_text_atomic(csv, report_csv(report, s.get<std::string>("method")));
  write_json(manifest_path(a.out),
             run.manifest(s, {{"gt", paths_to_strings(a.gts)}, {"pred", paths_to_strings(a.preds)}},
                          {a.out.string(), csv.string()}));
}

// ---------------------------------------------------------------------------------

struct RenderArgs {
  fs::path raster;
  fs::path pred;
  fs::path gt;
  fs::path out;
};

void run_render(const Settings& s, const RenderArgs& a) {
  Run run{"render"};
  if (a.pred.empty() && a.gt.empty()) throw UsageError("render needs --pred or --gt");
  const IntensityRaster raster = read_raster(a.raster);
  Overlay overlay;
  if (!a.pred.empty()) {
    const Json j = read_json(a.pred);
    overlay.predictions = polylines_from_json(j);
    if (j.is_object() && j.contains("vertices")) overlay.forks = fork_positions(dag_from_json(j));
  }
  if (!a.gt.empty()) overlay.ground_truth = polylines_from_json(read_json(a.gt));

  const std::string layout = s.get<std::string>("layout");
  RgbImage image;
  if (layout == "overlay") {
    image = render_overlay(raster, overlay);
  } else if (layout == "side-by-side") {
    image = render_side_by_side(raster, overlay);
  } else {
    throw UsageError("--layout must be overlay or side-by-side, got '" + layout + "'");
  }
  ensure_parent(a.out);
  write_png_rgb(a.out, image);
  Json inputs = {{"raster", a.raster.string()}};
  if (!a.pred.empty()) inputs["pred"] = a.pred.string();
  if (!a.gt.empty()) inputs["gt"] = a.gt.string();
  write_json(manifest_path(a.out), run.manifest(s, inputs, {a.out.string()}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lane-boundary DAG extraction from bird's-eye-view rasters"};
  app.set_version_flag("--version", LANEGRAPH_VERSION);
  app.require_subcommand(1);

  Settings settings;
  fs::path config_file;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON file with settings")->check(CLI::ExistingFile);
    settings.option<int>(sub, "--jobs", "jobs", "images processed in parallel");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  SynthArgs synth_args;
  synth->add_option("--out", synth_args.out, "output directory")->required();
  settings.option<std::uint64_t>(synth, "--seed", "seed", "random seed");
  settings.option<int>(synth, "--lanes", "lanes", "number of lanes");
  settings.option<double>(synth, "--length", "length_m", "scene length in metres");
  settings.option<double>(synth, "--lane-width", "lane_width_m", "lane width in metres");
  settings.option<double>(synth, "--resolution", "resolution_m_per_px", "metres per pixel");
  settings.option<std::string>(synth, "--events", "events", "e.g. fork@150,merge@300:60");
  settings.option<double>(synth, "--noise-sigma", "noise_sigma", "gaussian pixel noise");
  settings.option<double>(synth, "--dropout", "dropout", "probability a pixel reads 0");
  settings.option<int>(synth, "--max-height", "max_height_px", "raster height limit");
  add_common(synth);

  CLI::App* inf = app.add_subcommand("infer", "extract a lane DAG from a raster");
  InferArgs infer_args;
  inf->add_option("--raster", infer_args.rasters, "input raster PNG (repeatable)")->required();
  inf->add_option("--out", infer_args.out, "output JSON, or a directory for several rasters")->required();
  inf->add_option("--gt", infer_args.gts, "GT JSON for --from-gt-dt (default: next to the raster)");
  inf->add_option("--dt", infer_args.dts, "precomputed distance field PNG");
  inf->add_flag("--from-gt-dt", infer_args.from_gt_dt, "build the field from GT polylines");
  settings.option<int>(inf, "--step-px", "step_px", "step length");
  settings.option<std::string>(inf, "--roi", "roi", "RoI size HxW");
  settings.option<int>(inf, "--angle-samples", "angle_samples", "direction candidates");
  settings.option<double>(inf, "--fork-sep", "fork_sep_min_rad", "excluded angle around a taken branch");
  settings.option<double>(inf, "--merge-radius", "merge_radius_px", "merge detection radius");
  settings.option<double>(inf, "--ridge-threshold", "ridge_threshold", "state header ridge level");
  settings.option<int>(inf, "--max-steps", "max_steps_per_boundary", "steps per boundary");
  settings.option<int>(inf, "--max-vertices", "max_total_vertices", "vertex budget");
  settings.option<double>(inf, "--cover-radius", "recovery_cover_radius_px", "recovery coverage radius");
  settings.option<int>(inf, "--min-component", "recovery_min_component_px", "recovery component size");
  settings.option<double>(inf, "--binarize-threshold", "binarize_threshold", "skeleton field level");
  settings.option<double>(inf, "--intensity-threshold", "intensity_threshold",
                          "boundary level when the field comes from intensity");
  settings.flag(inf, "--recover,!--no-recover", "recover", "run the recovery pass (default on)");
  settings.option<std::vector<std::size_t>>(inf, "--drop-init", "drop_init",
                                            "indices of initial vertices to leave out");
  add_common(inf);

  CLI::App* ev = app.add_subcommand("eval", "score predictions against ground truth");
  EvalArgs eval_args;
  ev->add_option("--pred", eval_args.preds, "prediction JSON (repeatable)")->required();
  ev->add_option("--gt", eval_args.gts, "GT JSON (repeatable, aligned with --pred)")->required();
  ev->add_option("--out", eval_args.out, "report JSON")->required();
  ev->add_option("--csv", eval_args.csv, "table CSV (default: report path with .csv)");
  settings.option<std::vector<double>>(ev, "--thresholds", "thresholds", "pixel thresholds")
      ->delimiter(',');
  settings.option<double>(ev, "--topology-radius", "topology_radius_px", "assignment radius");
  settings.option<double>(ev, "--min-cover", "min_cover", "required GT coverage for topology");
  settings.option<std::string>(ev, "--method", "method", "row label in the CSV");
  add_common(ev);

  CLI::App* ren = app.add_subcommand("render", "draw predictions and GT over a raster");
  RenderArgs render_args;
  ren->add_option("--raster", render_args.raster, "raster PNG")->required();
  ren->add_option("--pred", render_args.pred, "prediction JSON");
  ren->add_option("--gt", render_args.gt, "GT JSON");
  ren->add_option("--out", render_args.out, "output PNG")->required();
  settings.option<std::string>(ren, "--layout", "layout", "overlay or side-by-side");
  add_common(ren);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (const char* env = std::getenv("TOOL_CONFIG"); env != nullptr && *env != '\0') {
      settings.merge_file(env);
    }
    if (!config_file.empty()) settings.merge_file(config_file);
    settings.apply_flags();

    if (synth->parsed()) run_synth(settings, synth_args);
    if (inf->parsed()) run_infer(settings, infer_args);
    if (ev->parsed()) run_eval(settings, eval_args);
    if (ren->parsed()) run_render(settings, render_args);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
