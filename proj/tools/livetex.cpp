// livetex: texture reconstruction, detection evaluation, synthetic scenes.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "livetex/error.hpp"
#include "livetex/pipeline.hpp"
#include "livetex/png_io.hpp"
#include "livetex/synth.hpp"

namespace {

using namespace livetex;
using json = nlohmann::json;

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << std::endl;
}

/// String-valued options that mirror config keys; only those given on the
/// command line override the config file.
struct Overrides {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    options[key] = app->add_option("--" + key, values[key], help);
  }
  void add_flag(CLI::App* app, const std::string& key, const std::string& help) {
    options[key] = app->add_flag("--" + key, help);
  }
  void apply(PipelineConfig& cfg) const {
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      set_config_option(cfg, key, opt->get_expected() == 0 ? "true" : values.at(key));
    }
  }
};

void add_common(CLI::App* app, Overrides& o) {
  o.add(app, "texture-size", "texture edge in texels (power of two, 64-4096)");
  o.add(app, "inlier-threshold", "minimum fraction of hue inliers");
  o.add(app, "hue-threshold", "maximum hue distance of an inlier, degrees");
  o.add(app, "max-candidates", "candidates consumed per frame");
  o.add(app, "v-black", "value below which a pixel reads as black");
  o.add(app, "v-white", "value above which an unsaturated pixel reads as white");
  o.add(app, "s-white", "saturation below which a bright pixel reads as white");
  o.add(app, "s-min", "minimum saturation for a defined hue");
}

int run_reconstruct(const std::string& config_path, const std::string& out, const Overrides& o) {
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  o.apply(cfg);
  cfg.output_dir = out;
  if (cfg.mesh_path.empty() || cfg.sequence_path.empty())
    throw Error(ErrorCode::invalid_argument, "reconstruct needs --mesh and --sequence (or a config naming them)");
  const ReconstructionResult r = run_reconstruction(cfg);
  const TimingStats t = [&] {
    std::vector<double> v;
    for (const auto& f : r.timings) v.push_back(f.total_ms);
    return summarize(v);
  }();
  std::cout << "frames " << r.frames << ", processed " << r.timings.size() << ", skipped " << r.skipped.size()
            << ", observed texels " << r.observed_texels << '\n';
  if (t.count) std::cout << "accumulate mean " << format_ms(t.mean) << " ms\n";
  for (const auto& s : r.skipped) std::cout << "skipped frame " << s.frame << ": " << s.code << ": " << s.message << '\n';
  for (const auto& w : r.warnings) std::cout << "warning: " << w << '\n';
  return 0;
}

int run_eval(const std::string& config_path, const std::string& frames, const std::string& gt_path,
             const std::string& candidates_path, const std::string& templates_path,
             const std::vector<std::string>& hypotheses, double radius, const std::string& out, const Overrides& o) {
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  o.apply(cfg);
  cfg.validate();

  const matcher::TemplateStore store = matcher::TemplateStore::load(templates_path);
  EvalInputs in;
  in.frames_dir = frames;
  in.ground_truth = load_ground_truth(gt_path);
  in.candidates = load_candidates(candidates_path);
  in.templates = &store;
  in.radius = radius;
  in.classify = cfg.matcher;
  for (const auto& h : hypotheses) {
    const auto eq = h.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::invalid_argument, "hypothesis must be id=texture.png, got '" + h + "'");
    in.hypotheses.push_back({h.substr(0, eq), read_png(h.substr(eq + 1))});
  }
  const EvalReport report = run_detection_eval(in);
  write_eval_report(out, report);
  std::cout << "frames " << report.frames << ", ground truth " << report.ground_truth << ", candidates used "
            << report.candidates_used << ", assignments " << report.assignments << '\n'
            << "true positive rate " << report.true_positive_rate << ", assignment accuracy "
            << report.assignment_accuracy << '\n';
  return 0;
}

int run_synth(const std::string& scene, SceneSpec spec, DetectionSceneSpec det, const std::string& out) {
  if (scene == "sequence") {
    generate_synthetic_scene(spec, out);
    std::cout << "wrote " << spec.frames << " frames of a " << spec.primitive << " to " << out << '\n';
  } else if (scene == "detection") {
    const DetectionSceneSummary s = generate_detection_scene(det, out);
    std::cout << "wrote " << s.frames << " test views, " << s.templates << " templates, " << s.true_candidates
              << " true and " << s.spurious_candidates << " spurious candidates to " << out << '\n';
  } else {
    throw Error(ErrorCode::invalid_argument, "scene must be 'sequence' or 'detection'");
  }
  return 0;
}

int run_timings(const std::string& run_dir, const std::string& out) {
  const TimingTable table = report_timings(run_dir);
  const std::string text = format_timing_table(table);
  std::cout << text;
  std::filesystem::create_directories(out);
  std::ofstream(std::filesystem::path(out) / "timings.txt") << text;
  json j = json::object();
  auto put = [&](const char* name, const std::optional<TimingStats>& s) {
    if (s) j[name] = {{"count", s->count}, {"mean_ms", s->mean}, {"median_ms", s->median}, {"max_ms", s->max}};
  };
  put("accumulate", table.accumulate);
  put("lookup", table.lookup);
  std::ofstream(std::filesystem::path(out) / "timings.json") << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Live texture reconstruction and texture-aware instance detection"};
  app.require_subcommand(1);

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "fuse a posed image sequence into a texture");
  std::string rec_config, rec_out;
  Overrides rec_o;
  rec->add_option("--config", rec_config, "key = value config file; flags override it");
  rec->add_option("--out", rec_out, "output directory")->required();
  rec_o.add(rec, "mesh", "OBJ mesh with texture coordinates");
  rec_o.add(rec, "sequence", "directory with frame_%06d.png, poses.txt, camera.txt");
  rec_o.add(rec, "merge-mode", "mean or argmax");
  rec_o.add(rec, "exposure", "first-frame or off");
  rec_o.add(rec, "depth-resolution", "depth bias floor in normalized units");
  rec_o.add(rec, "edge-depth-fraction", "depth jump marking an edge, fraction of the mesh diameter");
  rec_o.add(rec, "edge-dilation", "pixels discarded around depth edges");
  rec_o.add(rec, "blend-ramp", "boundary blending ramp in texels, 0 disables");
  rec_o.add_flag(rec, "dump-debug", "write per-frame depth, mask and increment images");
  rec_o.add_flag(rec, "dump-merge-maps", "write per-frame merge maps");
  add_common(rec, rec_o);

  // eval
  auto* ev = app.add_subcommand("eval", "classify detector candidates and score them against ground truth");
  std::string ev_config, ev_frames, ev_gt, ev_cands, ev_templates, ev_out;
  std::vector<std::string> ev_hyp;
  double ev_radius = kTruePositiveRadius;
  Overrides ev_o;
  ev->add_option("--config", ev_config, "key = value config file; flags override it");
  ev->add_option("--frames", ev_frames, "directory with frame_%06d.png and camera.txt")->required();
  ev->add_option("--gt", ev_gt, "ground truth JSON lines")->required();
  ev->add_option("--candidates", ev_cands, "candidate JSON lines")->required();
  ev->add_option("--templates", ev_templates, "template store directory")->required();
  ev->add_option("--hypothesis", ev_hyp, "instance hypothesis as id=texture.png (repeatable)")->required();
  ev->add_option("--radius", ev_radius, "true-positive radius in meters");
  ev->add_option("--out", ev_out, "output directory")->required();
  add_common(ev, ev_o);

  // synth
  auto* sy = app.add_subcommand("synth", "generate a synthetic scene");
  std::string sy_scene = "sequence", sy_out;
  SceneSpec spec;
  DetectionSceneSpec det;
  sy->add_option("--scene", sy_scene, "sequence or detection");
  sy->add_option("--primitive", spec.primitive, "quad, cube, icosphere or torus");
  sy->add_option("--scale", spec.scale, "object size in meters");
  sy->add_option("--texture", spec.texture, "checkerboard, noise or image");
  sy->add_option("--texture-image", spec.texture_image, "PNG for --texture image");
  sy->add_option("--texture-size", spec.texture_size, "ground-truth texture edge");
  sy->add_option("--checker-cells", spec.checker_cells, "checkerboard cells per side");
  sy->add_option("--frames", spec.frames, "frame count");
  sy->add_option("--seed", spec.seed, "random seed");
  sy->add_option("--orbit-radius", spec.orbit_radius, "camera distance in meters");
  sy->add_option("--elevation", spec.orbit_elevation_deg, "orbit elevation in degrees");
  sy->add_option("--test-views", det.test_views, "detection scene: test views");
  sy->add_option("--spurious", det.spurious_fraction, "detection scene: fraction of spurious candidates");
  sy->add_option("--out", sy_out, "output directory")->required();

  // timings
  auto* ti = app.add_subcommand("timings", "summarize the timings of a reconstruct or eval run");
  std::string ti_run, ti_out;
  ti->add_option("--run", ti_run, "run directory holding timings.csv and/or lookup_timings.csv")->required();
  ti->add_option("--out", ti_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("invalid_argument", e.what());
    return 2;
  }

  try {
    if (*rec) return run_reconstruct(rec_config, rec_out, rec_o);
    if (*ev) return run_eval(ev_config, ev_frames, ev_gt, ev_cands, ev_templates, ev_hyp, ev_radius, ev_out, ev_o);
    if (*sy) {
      det.seed = spec.seed;
      det.texture_size = spec.texture_size;
      return run_synth(sy_scene, spec, det, sy_out);
    }
    if (*ti) return run_timings(ti_run, ti_out);
  } catch (const Error& e) {
    print_error(std::string(to_string(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
