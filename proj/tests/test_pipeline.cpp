#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "doctest.h"

#include "livetex/error.hpp"
#include "livetex/pipeline.hpp"
#include "livetex/png_io.hpp"
#include "livetex/primitives.hpp"
#include "livetex/synth.hpp"
#include "test_support.hpp"

using namespace livetex;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::io;
}

// fraction of observed texels within tol of the truth
double agreement(const fusion::TextureAccumulator& acc, const RgbImage& truth, float tol) {
  std::size_t seen = 0, good = 0;
  const int n = acc.size();
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (!acc.observed(x, y)) continue;
      ++seen;
      good += max_abs_diff(acc.color()(x, y), truth(x, y)) <= tol;
    }
  return seen ? double(good) / double(seen) : 0.0;
}

SceneSpec small_scene() {
  SceneSpec s;
  s.primitive = "cube";
  s.scale = 0.2;
  s.texture = "noise";
  s.texture_size = 128;
  s.frames = 6;
  s.seed = 4;
  s.orbit_radius = 0.6;
  return s;
}

}  // namespace

TEST_CASE("config options") {
  PipelineConfig cfg;
  set_config_option(cfg, "texture-size", "512");
  set_config_option(cfg, "merge-mode", "mean");
  set_config_option(cfg, "exposure", "off");
  set_config_option(cfg, "blend-ramp", "0");
  set_config_option(cfg, "inlier-threshold", "0.6");
  set_config_option(cfg, "dump-debug", "true");
  CHECK(cfg.raster.texture_size == 512);
  CHECK(cfg.merge_mode == fusion::MergeMode::mean);
  CHECK(cfg.exposure_mode == exposure::Mode::off);
  CHECK(cfg.blend_ramp == 0);
  CHECK(cfg.matcher.inlier_threshold == 0.6);
  CHECK(cfg.dump_debug);
  CHECK(to_string(fusion::MergeMode::argmax) == "argmax");
  CHECK(to_string(exposure::Mode::first_frame) == "first-frame");

  CHECK(code_of([&] { set_config_option(cfg, "texture-sise", "512"); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { set_config_option(cfg, "merge-mode", "median"); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { set_config_option(cfg, "texture-size", "lots"); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { set_config_option(cfg, "dump-debug", "maybe"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("texture size must be a power of two in range") {
  for (int ok : {64, 128, 1024, 4096}) {
    PipelineConfig cfg;
    cfg.raster.texture_size = ok;
    CHECK_NOTHROW(cfg.validate());
  }
  for (int bad : {0, 32, 100, 1000, 8192, -64}) {
    PipelineConfig cfg;
    cfg.raster.texture_size = bad;
    CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::invalid_argument);
  }
  PipelineConfig cfg;
  cfg.matcher.inlier_threshold = 1.5;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::invalid_argument);
}

TEST_CASE("config file") {
  test::TempDir dir("cfg");
  std::ofstream(dir / "a.cfg") << "# comment\n\ntexture-size = 256\nmerge-mode=mean  \n";
  const PipelineConfig cfg = load_config(dir / "a.cfg");
  CHECK(cfg.raster.texture_size == 256);
  CHECK(cfg.merge_mode == fusion::MergeMode::mean);

  std::ofstream(dir / "b.cfg") << "texture-size = 256\nnonsense\n";
  try {
    load_config(dir / "b.cfg");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("b.cfg:2") != std::string::npos);
  }
  std::ofstream(dir / "c.cfg") << "colour = red\n";
  CHECK(code_of([&] { load_config(dir / "c.cfg"); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { load_config(dir / "missing.cfg"); }) == ErrorCode::io);
}

TEST_CASE("a sequence with no frames gives an empty texture") {
  test::TempDir dir("empty");
  SceneSpec spec = small_scene();
  spec.frames = 0;
  generate_synthetic_scene(spec, dir / "seq");
  PipelineConfig cfg;
  cfg.mesh_path = dir / "seq" / "mesh.obj";
  cfg.sequence_path = dir / "seq";
  cfg.output_dir = dir / "out";
  cfg.raster.texture_size = 64;
  const ReconstructionResult r = run_reconstruction(cfg);
  CHECK(r.frames == 0);
  CHECK(r.observed_texels == 0);
  CHECK(r.timings.empty());
  CHECK(std::filesystem::exists(dir / "out" / "texture.png"));
  CHECK(std::filesystem::exists(dir / "out" / "report.json"));
  const TimingTable t = report_timings(dir / "out");
  CHECK_FALSE(t.accumulate.has_value());
  CHECK_FALSE(t.lookup.has_value());
  CHECK(format_timing_table(t).find("accumulate") == std::string::npos);
}

TEST_CASE("noiseless reconstruction matches the ground-truth texture") {
  test::TempDir dir("recon");
  const SceneSpec spec = small_scene();
  generate_synthetic_scene(spec, dir / "seq");
  const RgbImage truth = read_png(dir / "seq" / "gt_texture.png");

  for (auto mode : {fusion::MergeMode::argmax, fusion::MergeMode::mean}) {
    CAPTURE(to_string(mode));
    PipelineConfig cfg;
    cfg.raster.texture_size = 128;
    cfg.merge_mode = mode;
    cfg.exposure_mode = exposure::Mode::off;
    Reconstructor rec(load_mesh(dir / "seq" / "mesh.obj"), cfg);
    SequenceReader reader(dir / "seq");
    int processed = 0;
    while (auto f = reader.next()) processed += rec.process(*f).has_value();
    CHECK(processed == spec.frames);
    CHECK(rec.skipped().empty());
    CHECK(rec.texture().observed_count() > 128u * 128u / 4);
    CHECK(agreement(rec.texture(), truth, 0.05f) >= 0.95);
  }
}

TEST_CASE("run_reconstruction writes its outputs") {
  test::TempDir dir("run");
  generate_synthetic_scene(small_scene(), dir / "seq");
  PipelineConfig cfg;
  cfg.mesh_path = dir / "seq" / "mesh.obj";
  cfg.sequence_path = dir / "seq";
  cfg.output_dir = dir / "out";
  cfg.raster.texture_size = 128;
  cfg.dump_debug = true;
  cfg.dump_merge_maps = true;
  const ReconstructionResult r = run_reconstruction(cfg);
  CHECK(r.frames == 6);
  CHECK(r.timings.size() == 6);
  for (const char* f : {"texture.png", "score.png", "timings.csv", "report.json", "debug/depth_000000.png",
                        "debug/mask_000005.png", "debug/increment_000003.png", "merge_maps/frame_000002.png"})
    CHECK_MESSAGE(std::filesystem::exists(dir / "out" / f), f);
  const RgbImage tex = read_png(dir / "out" / "texture.png");
  CHECK(tex.width() == 128);
  const TimingTable t = report_timings(dir / "out");
  REQUIRE(t.accumulate.has_value());
  CHECK(t.accumulate->count == 6);
  for (const auto& ft : r.timings) {
    CHECK(ft.total_ms > 0);
    CHECK(ft.texels > 0);
  }
}

TEST_CASE("bad frames are skipped, not fatal") {
  const Mesh cube = make_cube(0.2);
  PipelineConfig cfg;
  cfg.raster.texture_size = 64;
  Reconstructor rec(cube, cfg);
  FrameRecord good;
  good.camera = default_camera();
  good.pose = orbit_poses(1, 0.6, 30, 1)[0];
  good.image = raster::render_color(cube, RgbImage(8, 8, Rgb{0.5f, 0.5f, 0.5f}), good.camera, good.pose).color;

  FrameRecord behind = good;
  behind.index = 1;
  behind.pose.translation.z() = -1.0;
  FrameRecord small = good;
  small.index = 2;
  small.image = RgbImage(10, 10);

  CHECK(rec.process(good).has_value());
  const std::size_t after_good = rec.texture().observed_count();
  CHECK_FALSE(rec.process(behind).has_value());
  CHECK_FALSE(rec.process(small).has_value());
  CHECK(rec.texture().observed_count() == after_good);
  REQUIRE(rec.skipped().size() == 2);
  CHECK(rec.skipped()[0].frame == 1);
  CHECK(rec.skipped()[1].code == "frame_mismatch");
}

TEST_CASE("ground truth and candidates survive a round trip") {
  test::TempDir dir("jsonl");
  std::vector<GroundTruthInstance> gt{{3, "red", matcher::view_pose({0.2, 0.1, 0.9}, 0.8, 15)},
                                      {4, "white", orbit_poses(1, 0.5, 20, 2)[0]}};
  write_ground_truth(dir / "gt.jsonl", gt);
  const auto gt2 = load_ground_truth(dir / "gt.jsonl");
  REQUIRE(gt2.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(gt2[i].frame == gt[i].frame);
    CHECK(gt2[i].texture_id == gt[i].texture_id);
    CHECK((gt2[i].pose.matrix() - gt[i].pose.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }

  std::vector<FrameCandidate> c{{3, {5, 10, 20, 0.9, 2}}, {4, {1, -3, 7, 0.5, std::nullopt}}};
  write_candidates(dir / "c.jsonl", c);
  const auto c2 = load_candidates(dir / "c.jsonl");
  REQUIRE(c2.size() == 2);
  CHECK(c2[0].candidate.template_id == 5);
  CHECK(c2[0].candidate.depth_bin == 2);
  CHECK(c2[1].candidate.x == -3);
  CHECK_FALSE(c2[1].candidate.depth_bin.has_value());
  CHECK(c2[1].candidate.score == 0.5);

  std::ofstream(dir / "bad.jsonl") << "{\"frame\": 1}\n";
  try {
    load_candidates(dir / "bad.jsonl");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("bad.jsonl:1") != std::string::npos);
  }
}

TEST_CASE("position estimate follows the template") {
  const PinholeCamera cam = default_camera();
  const auto poses = matcher::sample_template_poses();
  const matcher::HueTemplate t = matcher::make_template(make_cube(0.12), cam, poses[10].pose);
  matcher::Candidate c{0, t.bbox.x, t.bbox.y, 1.0, std::nullopt};
  CHECK((estimate_position(c, t, cam) - t.pose.translation).norm() < 1e-9);
  c.depth_bin = 5;
  CHECK(estimate_position(c, t, cam).norm() == doctest::Approx(1.15));
  // a pixel shift moves sideways by about distance / f
  c.depth_bin.reset();
  c.x += 10;
  const double moved = (estimate_position(c, t, cam) - t.pose.translation).norm();
  CHECK(moved == doctest::Approx(10 * t.pose.translation.norm() / cam.fx).epsilon(0.02));
}

namespace {

// Two cubes in one test frame with exact candidates.
struct EvalFixture {
  test::TempDir dir{"eval"};
  PinholeCamera cam = default_camera();
  matcher::TemplateStore store;
  EvalInputs in;

  EvalFixture() {
    const Mesh cube = make_cube(0.12);
    const RgbImage red(16, 16, Rgb{0.85f, 0.1f, 0.1f}), white(16, 16, Rgb{0.95f, 0.95f, 0.95f});
    const auto poses = matcher::sample_template_poses();
    // side by side: same view, shifted sideways
    RigidPose pr = poses[400].pose, pw = poses[400].pose;
    pr.translation.x() -= 0.14;
    pw.translation.x() += 0.14;
    raster::ColorRender r;
    r.color = clutter_image(cam.width, cam.height, 9);
    r.depth = Grid<float>(cam.width, cam.height, raster::kBackground);
    r.uv = Grid<raster::Uv>(cam.width, cam.height);
    r.coverage = Mask(cam.width, cam.height, 0);
    raster::render_color_into(cube, red, cam, pr, r);
    raster::render_color_into(cube, white, cam, pw, r);
    std::filesystem::create_directories(dir / "test");
    write_png(frame_path(dir / "test", 0), r.color);
    write_camera(dir / "test" / "camera.txt", cam);
    const int tr = store.add(matcher::make_template(cube, cam, pr));
    const int tw = store.add(matcher::make_template(cube, cam, pw));
    in.frames_dir = dir / "test";
    in.ground_truth = {{0, "red", pr}, {0, "white", pw}};
    in.candidates = {{0, {tr, store.at(tr).bbox.x, store.at(tr).bbox.y, 0.9, std::nullopt}},
                     {0, {tw, store.at(tw).bbox.x, store.at(tw).bbox.y, 0.8, std::nullopt}}};
    in.templates = &store;
    in.hypotheses = {{"red", red}, {"white", white}};
  }
};

}  // namespace

TEST_CASE("eval with exact candidates") {
  EvalFixture fx;
  const EvalReport r = run_detection_eval(fx.in);
  CHECK(r.frames == 1);
  CHECK(r.ground_truth == 2);
  CHECK(r.assignments == 2);
  CHECK(r.true_positives == 2);
  CHECK(r.true_positive_rate == 1.0);
  CHECK(r.assignment_accuracy == 1.0);
  CHECK(r.lookup_ms.size() >= 2);

  write_eval_report(fx.dir / "out", r);
  for (const char* f : {"report.json", "assignments.jsonl", "lookup_timings.csv"})
    CHECK(std::filesystem::exists(fx.dir / "out" / f));
  const TimingTable t = report_timings(fx.dir / "out");
  REQUIRE(t.lookup.has_value());
  CHECK(t.lookup->count == r.lookup_ms.size());
}

TEST_CASE("ground truth displaced beyond the radius is missed") {
  EvalFixture fx;
  for (auto& g : fx.in.ground_truth) g.pose.translation.x() += 0.15;
  const EvalReport r = run_detection_eval(fx.in);
  CHECK(r.assignments == 2);
  CHECK(r.true_positives == 0);
  CHECK(r.true_positive_rate == 0.0);
  CHECK(r.assignment_accuracy == 0.0);
}

TEST_CASE("swapped hypothesis labels are not true positives") {
  EvalFixture fx;
  std::swap(fx.in.ground_truth[0].texture_id, fx.in.ground_truth[1].texture_id);
  const EvalReport r = run_detection_eval(fx.in);
  CHECK(r.true_positives == 0);
}

TEST_CASE("eval frame mismatches") {
  EvalFixture fx;
  EvalInputs orphan = fx.in;
  orphan.candidates.push_back({7, {0, 0, 0, 0.1, std::nullopt}});
  CHECK(code_of([&] { run_detection_eval(orphan); }) == ErrorCode::frame_mismatch);
  EvalInputs missing = fx.in;
  missing.ground_truth.push_back({3, "red", fx.in.ground_truth[0].pose});
  CHECK(code_of([&] { run_detection_eval(missing); }) == ErrorCode::frame_mismatch);
}

TEST_CASE("timing summary") {
  const TimingStats s = summarize({4, 1, 3, 2});
  CHECK(s.count == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.max == 4);
  CHECK(summarize({5, 1, 3}).median == 3);
  CHECK(summarize({}).count == 0);
}

TEST_CASE("milliseconds keep two significant digits") {
  auto sig = [](const std::string& s) {
    int n = 0;
    bool lead = true;
    for (char c : s) {
      if (c < '0' || c > '9') continue;
      if (lead && c == '0') continue;
      lead = false;
      ++n;
    }
    return n;
  };
  for (double v : {0.0123, 0.82, 2.69, 9.99, 12.0, 38.6, 1234.5}) {
    const std::string s = format_ms(v);
    CAPTURE(s);
    CHECK(sig(s) >= 2);
    CHECK(std::stod(s) == doctest::Approx(v).epsilon(0.01));
  }
}

TEST_CASE("timing csv parsing") {
  test::TempDir dir("timings");
  std::ofstream(dir / "timings.csv") << "frame,total_ms\n0,10\n1,20\n\n2,30\n";
  const TimingTable t = report_timings(dir.path());
  REQUIRE(t.accumulate.has_value());
  CHECK(t.accumulate->mean == 20);
  CHECK(format_timing_table(t).find("accumulate") != std::string::npos);
  std::ofstream(dir / "lookup_timings.csv") << "other\n1\n";
  CHECK(code_of([&] { report_timings(dir.path()); }) == ErrorCode::parse);
}

TEST_CASE("synthetic scenes are deterministic") {
  test::TempDir dir("synth");
  SceneSpec spec = small_scene();
  spec.frames = 2;
  generate_synthetic_scene(spec, dir / "a");
  generate_synthetic_scene(spec, dir / "b");
  for (const char* f : {"frame_000000.png", "frame_000001.png", "poses.txt", "camera.txt", "mesh.obj", "gt.jsonl",
                        "gt_texture.png"})
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  spec.seed = 5;
  generate_synthetic_scene(spec, dir / "c");
  CHECK(slurp(dir / "a" / "poses.txt") != slurp(dir / "c" / "poses.txt"));
}

TEST_CASE("synthetic scene errors") {
  SceneSpec spec = small_scene();
  spec.primitive = "teapot";
  CHECK(code_of([&] { make_sequence(spec); }) == ErrorCode::unknown_primitive);
  spec = small_scene();
  spec.texture = "marble";
  CHECK(code_of([&] { make_sequence(spec); }) == ErrorCode::invalid_argument);
  spec = small_scene();
  spec.frames = -1;
  CHECK(code_of([&] { make_sequence(spec); }) == ErrorCode::invalid_argument);
}

TEST_CASE("orbit poses look at the origin") {
  const auto poses = orbit_poses(8, 0.7, 30, 3);
  REQUIRE(poses.size() == 8);
  for (const auto& p : poses) {
    CHECK(p.translation.norm() == doctest::Approx(0.7));
    CHECK(p.camera_center().z() == doctest::Approx(0.7 * std::sin(30 * M_PI / 180)));
    const Eigen::Vector3d o = p.apply(Eigen::Vector3d::Zero());
    CHECK(std::abs(o.x()) < 1e-9);
    CHECK(std::abs(o.y()) < 1e-9);
  }
}
