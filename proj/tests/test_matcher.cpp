#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

#include "livetex/error.hpp"
#include "livetex/matcher.hpp"
#include "livetex/primitives.hpp"
#include "livetex/raster.hpp"
#include "livetex/synth.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace livetex;
using namespace livetex::matcher;

namespace {

RigidPose facing_pose(double distance) {
  RigidPose p;
  p.rotation = Eigen::Vector3d(1, -1, -1).asDiagonal();
  p.translation = {0, 0, distance};
  return p;
}

// Textbook HSV hue in degrees.
double reference_hue(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  if (d == 0) return 0;
  double h;
  if (mx == r)
    h = 60 * (g - b) / d;
  else if (mx == g)
    h = 60 * (b - r) / d + 120;
  else
    h = 60 * (r - g) / d + 240;
  return h < 0 ? h + 360 : h;
}

// A red cube on the left, a white cube on the right, over clutter.
struct TwoCubes {
  PinholeCamera cam = default_camera();
  Mesh cube = make_cube(0.12);
  RigidPose red_pose, white_pose;
  RgbImage frame;
  TemplateStore store;
  Candidate red_cand, white_cand;
  std::vector<InstanceHypothesis> hypotheses;

  TwoCubes() {
    RigidPose base = RigidPose::look_at({0.5, -0.6, 0.5}, Eigen::Vector3d::Zero());
    red_pose = base, white_pose = base;
    red_pose.translation += Eigen::Vector3d(-0.13, 0, 0);
    white_pose.translation += Eigen::Vector3d(0.13, 0, 0);
    const RgbImage red(32, 32, Rgb{0.8f, 0.1f, 0.1f}), white(32, 32, Rgb{0.95f, 0.95f, 0.95f});
    raster::ColorRender r;
    r.color = clutter_image(cam.width, cam.height, 3);
    r.depth = Grid<float>(cam.width, cam.height, raster::kBackground);
    r.uv = Grid<raster::Uv>(cam.width, cam.height);
    r.coverage = Mask(cam.width, cam.height, 0);
    raster::render_color_into(cube, red, cam, red_pose, r);
    raster::render_color_into(cube, white, cam, white_pose, r);
    frame = r.color;
    const int red_id = store.add(make_template(cube, cam, red_pose));
    const int white_id = store.add(make_template(cube, cam, white_pose));
    red_cand = {red_id, store.at(red_id).bbox.x, store.at(red_id).bbox.y, 0.9, std::nullopt};
    white_cand = {white_id, store.at(white_id).bbox.x, store.at(white_id).bbox.y, 0.8, std::nullopt};
    hypotheses = {{"red", red}, {"white", white}};
  }
};

}  // namespace

TEST_CASE("black, white and red descriptors") {
  CHECK(descriptor_hue({0, 0, 0}) == kBlackHue);
  CHECK(*descriptor_hue({0, 0, 0}) == 240.f);
  CHECK(*descriptor_hue({1, 1, 1}) == 60.f);
  CHECK(*descriptor_hue({1, 0, 0}) == 0.f);
  CHECK(*descriptor_hue({0, 1, 0}) == 120.f);
  CHECK(*descriptor_hue({0, 0, 1}) == 240.f);
  CHECK_FALSE(descriptor_hue({0.5f, 0.5f, 0.5f}).has_value());  // gray: neither remapped nor chromatic
  CHECK(*descriptor_hue({0.05f, 0.9f, 0.9f}) == doctest::Approx(180.f));
}

TEST_CASE("remap thresholds") {
  HueConfig cfg;
  CHECK(*descriptor_hue({0.11f, 0.02f, 0.02f}, cfg) == 240.f);  // dark red reads as black
  CHECK(*descriptor_hue({0.72f, 0.71f, 0.7f}, cfg) == 60.f);
  CHECK(descriptor_hue({0.6f, 0.59f, 0.58f}, cfg) == std::nullopt);
  cfg.v_black = 0.05f;
  CHECK(*descriptor_hue({0.11f, 0.02f, 0.02f}, cfg) == doctest::Approx(0.f));
}

TEST_CASE("hue matches the textbook formula") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (int i = 0; i < 2000; ++i) {
    const Rgb c{u(rng), u(rng), u(rng)};
    const Hsv h = rgb_to_hsv(c);
    CHECK(hue_distance(h.h, static_cast<float>(reference_hue(c.r, c.g, c.b))) < 1e-3f);
    CHECK(h.h >= 0.f);
    CHECK(h.h < 360.f);
    CHECK(h.v == std::max({c.r, c.g, c.b}));
  }
}

TEST_CASE("circular hue distance") {
  CHECK(hue_distance(350.f, 10.f) == 20.f);
  CHECK(hue_distance(10.f, 350.f) == 20.f);
  CHECK(hue_distance(0.f, 180.f) == 180.f);
  std::mt19937 rng(32);
  std::uniform_real_distribution<float> u(0.f, 360.f);
  for (int i = 0; i < 1000; ++i) {
    const float a = u(rng), b = u(rng);
    CHECK(hue_distance(a, b) == hue_distance(b, a));
    CHECK(hue_distance(a, b) <= 180.f);
    CHECK(hue_distance(a, a) == 0.f);
  }
}

TEST_CASE("frontal quad template is a uv ramp") {
  const PinholeCamera cam{200, 200, 99.5, 99.5, 200, 200};
  const HueTemplate t = make_template(make_quad(1.0), cam, facing_pose(2.0));
  CHECK(t.bbox.x == 50);
  CHECK(t.bbox.y == 50);
  CHECK(t.bbox.width == 100);
  CHECK(t.bbox.height == 100);
  for (int y = 0; y < t.bbox.height; ++y)
    for (int x = 0; x < t.bbox.width; ++x) {
      REQUIRE(t.mask(x, y) == 1);
      CHECK(t.uv_map(x, y)[0] == doctest::Approx((x + 0.5) / 100.0).epsilon(1e-4));
      CHECK(t.uv_map(x, y)[1] == doctest::Approx(1.0 - (y + 0.5) / 100.0).epsilon(1e-4));
    }
  // object origin at the image center
  CHECK(t.origin.x() + t.bbox.x == doctest::Approx(99.5));
}

TEST_CASE("template size scales with distance") {
  const Mesh sphere = make_icosphere(0.1, 2);
  const PinholeCamera cam = default_camera();
  const HueTemplate near = make_template(sphere, cam, view_pose({0, 0, 1}, 0.65, 0));
  const HueTemplate far = make_template(sphere, cam, view_pose({0, 0, 1}, 1.15, 0));
  CHECK(double(near.bbox.width) / far.bbox.width == doctest::Approx(1.15 / 0.65).epsilon(0.03));
  CHECK(double(near.bbox.height) / far.bbox.height == doctest::Approx(1.15 / 0.65).epsilon(0.03));
}

TEST_CASE("template uv lookup reproduces the rendered colors") {
  const Mesh torus = make_primitive("torus", 0.2);
  const PinholeCamera cam = default_camera();
  const RgbImage tex = noise_texture(128, 5);
  for (const TemplatePose& tp : {sample_template_poses()[100], sample_template_poses()[2000]}) {
    const HueTemplate t = make_template(torus, cam, tp.pose);
    const raster::ColorRender r = raster::render_color(torus, tex, cam, tp.pose);
    int masked = 0;
    for (int y = 0; y < t.bbox.height; ++y)
      for (int x = 0; x < t.bbox.width; ++x) {
        CHECK(t.mask(x, y) == r.coverage(t.bbox.x + x, t.bbox.y + y));
        if (!t.mask(x, y)) continue;
        ++masked;
        const Rgb want = r.color(t.bbox.x + x, t.bbox.y + y);
        CHECK(max_abs_diff(sample_uv(tex, t.uv_map(x, y)[0], t.uv_map(x, y)[1]), want) <= 2.f / 255.f);
      }
    CHECK(masked > 100);
    // bbox is tight
    int top = 0, left = 0;
    for (int x = 0; x < t.bbox.width; ++x) top += t.mask(x, 0);
    for (int y = 0; y < t.bbox.height; ++y) left += t.mask(0, y);
    CHECK(top > 0);
    CHECK(left > 0);
  }
}

TEST_CASE("template of an invisible object") {
  RigidPose pose;
  pose.translation = {5, 0, 1};  // far off to the side
  try {
    make_template(make_cube(0.1), default_camera(), pose);
    FAIL("expected not_visible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_visible);
  }
}

TEST_CASE("expected hue of flat textures") {
  const HueTemplate t = make_template(make_cube(0.12), default_camera(), view_pose({0.3, 0.4, 0.8}, 0.7, 15));
  const HueImage red = expected_hue(t, {"r", RgbImage(16, 16, Rgb{1, 0, 0})});
  const HueImage white = expected_hue(t, {"w", RgbImage(16, 16, Rgb{1, 1, 1})});
  for (int y = 0; y < t.bbox.height; ++y)
    for (int x = 0; x < t.bbox.width; ++x) {
      CHECK(red.defined(x, y) == t.mask(x, y));
      if (!t.mask(x, y)) continue;
      CHECK(red.hue(x, y) == 0.f);
      CHECK(white.hue(x, y) == 60.f);
    }
}

TEST_CASE("swapping the hypothesis changes only where textures differ") {
  const HueTemplate t = make_template(make_cube(0.12), default_camera(), view_pose({0.3, 0.4, 0.8}, 0.7, 0));
  const HueTemplate copy = t;
  RgbImage a(64, 64, Rgb{0.2f, 0.6f, 0.2f});
  RgbImage b = a;
  for (int y = 0; y < 64; ++y)
    for (int x = 40; x < 64; ++x) b(x, y) = {0.2f, 0.2f, 0.8f};
  const HueImage ha = expected_hue(t, {"a", a});
  const HueImage hb = expected_hue(t, {"b", b});
  int changed = 0;
  for (int y = 0; y < t.bbox.height; ++y)
    for (int x = 0; x < t.bbox.width; ++x) {
      if (!t.mask(x, y)) continue;
      const Rgb ca = sample_uv(a, t.uv_map(x, y)[0], t.uv_map(x, y)[1]);
      const Rgb cb = sample_uv(b, t.uv_map(x, y)[0], t.uv_map(x, y)[1]);
      if (ca == cb) CHECK(ha.hue(x, y) == hb.hue(x, y));
      changed += ha.hue(x, y) != hb.hue(x, y);
    }
  CHECK(changed > 0);
  CHECK(t.uv_map == copy.uv_map);
  CHECK(t.mask == copy.mask);
}

TEST_CASE("inlier fraction") {
  const int w = 30, h = 20;
  HueImage a{Grid<float>(w, h, 100.f), Mask(w, h, 1)};
  const Mask all(w, h, 1);
  CHECK(color_inlier_fraction(a, a, all).fraction == 1.0);

  HueImage p{Grid<float>(w, h, 350.f), Mask(w, h, 1)}, q{Grid<float>(w, h, 10.f), Mask(w, h, 1)};
  CHECK(color_inlier_fraction(p, q, all).fraction == 1.0);

  const InlierResult none = color_inlier_fraction(a, a, Mask(w, h, 0));
  CHECK(none.degenerate);
  CHECK(none.fraction == 0.0);

  CHECK_THROWS_AS(color_inlier_fraction(a, HueImage{Grid<float>(3, 3), Mask(3, 3)}, all), Error);
}

TEST_CASE("inlier fraction matches a naive loop") {
  std::mt19937 rng(33);
  std::uniform_real_distribution<float> hue(0.f, 360.f);
  std::bernoulli_distribution coin(0.8);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 40, h = 30;
    HueImage o{Grid<float>(w, h), Mask(w, h)}, e{Grid<float>(w, h), Mask(w, h)};
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        o.hue(x, y) = hue(rng), e.hue(x, y) = hue(rng);
        o.defined(x, y) = coin(rng), e.defined(x, y) = coin(rng), m(x, y) = coin(rng);
      }
    std::size_t in = 0, counted = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!m(x, y) || !o.defined(x, y) || !e.defined(x, y)) continue;
        ++counted;
        double d = std::fabs(double(o.hue(x, y)) - e.hue(x, y));
        if (d > 180) d = 360 - d;
        in += d <= 54.0;
      }
    const InlierResult r = color_inlier_fraction(o, e, m);
    CHECK(r.counted == counted);
    CHECK(r.inliers == in);
    CHECK(r.fraction == double(in) / double(counted));
  }
}

TEST_CASE("crop outside the frame is undefined") {
  HueImage f{Grid<float>(10, 10, 30.f), Mask(10, 10, 1)};
  const HueImage c = crop(f, {-2, 8, 5, 5});
  CHECK(c.defined(0, 0) == 0);
  CHECK(c.defined(2, 0) == 1);
  CHECK(c.hue(2, 1) == 30.f);
  CHECK(c.defined(2, 2) == 0);
}

TEST_CASE("one red instance takes the red hypothesis only") {
  TwoCubes s;
  const HueImage hue = hue_descriptor(s.frame);
  const std::vector<Candidate> cands{s.red_cand};
  const auto out = classify_instances(hue, cands, s.store, s.hypotheses);
  REQUIRE(out.size() == 1);
  CHECK(out[0].texture_id == "red");
  CHECK(out[0].fraction >= 0.7);
}

TEST_CASE("red and white are told apart without repetition") {
  TwoCubes s;
  const HueImage hue = hue_descriptor(s.frame);
  // white first, and the red candidate repeated
  const std::vector<Candidate> cands{s.white_cand, s.red_cand, s.red_cand};
  ClassifyStats stats;
  const auto out = classify_instances(hue, cands, s.store, s.hypotheses, {}, &stats);
  REQUIRE(out.size() == 2);
  CHECK(out[0].texture_id == "white");
  CHECK(out[0].candidate_index == 0);
  CHECK(out[1].texture_id == "red");
  CHECK(out[1].candidate_index == 1);
  CHECK(stats.candidates_used == 2);  // stops once both are assigned
  CHECK(stats.lookup_ms.size() == 3);
}

TEST_CASE("clutter candidates are rejected and the cap holds") {
  TwoCubes s;
  const HueImage hue = hue_descriptor(s.frame);
  std::vector<Candidate> cands;
  std::mt19937 rng(34);
  const HueTemplate& t = s.store.at(0);
  // windows in the lower band, clear of both cubes
  std::uniform_int_distribution<int> x(0, s.cam.width - t.bbox.width), y(400, s.cam.height - 1);
  for (int i = 0; i < 40; ++i) cands.push_back({0, x(rng), y(rng), 0.5, std::nullopt});
  cands.push_back(s.red_cand);
  ClassifyStats stats;
  const auto out = classify_instances(hue, cands, s.store, s.hypotheses, {}, &stats);
  CHECK(out.empty());
  CHECK(stats.candidates_used == 30);
}

TEST_CASE("classification is injective, deterministic and monotone in the threshold") {
  TwoCubes s;
  const HueImage hue = hue_descriptor(s.frame);
  std::vector<Candidate> cands;
  std::mt19937 rng(35);
  std::uniform_int_distribution<int> jitter(-6, 6);
  for (int i = 0; i < 20; ++i) {
    Candidate c = i % 2 ? s.red_cand : s.white_cand;
    c.x += jitter(rng), c.y += jitter(rng);
    cands.push_back(c);
  }
  std::vector<InstanceHypothesis> hyps = s.hypotheses;
  hyps.push_back({"green", RgbImage(8, 8, Rgb{0.1f, 0.8f, 0.1f})});
  hyps.push_back({"red2", s.hypotheses[0].texture});

  std::size_t previous = 1000;
  for (double thr : {0.0, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 1.0}) {
    ClassifyConfig cfg;
    cfg.inlier_threshold = thr;
    const auto a = classify_instances(hue, cands, s.store, hyps, cfg);
    const auto b = classify_instances(hue, cands, s.store, hyps, cfg);
    REQUIRE(a.size() == b.size());
    std::set<std::string> ids;
    std::set<std::size_t> used;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].texture_id == b[i].texture_id);
      CHECK(a[i].candidate_index == b[i].candidate_index);
      CHECK(a[i].fraction >= thr);
      ids.insert(a[i].texture_id);
      used.insert(a[i].candidate_index);
    }
    CHECK(ids.size() == a.size());
    CHECK(used.size() == a.size());
    CHECK(a.size() <= previous);
    previous = a.size();
  }
}

TEST_CASE("pose sampler counts") {
  CHECK(icosphere_directions(2).size() == 162);
  const auto poses = sample_template_poses();
  CHECK(poses.size() == 3738);
  std::set<int> views, rolls, bins;
  for (const auto& p : poses) {
    views.insert(p.view);
    rolls.insert(p.roll_index);
    bins.insert(p.distance_bin);
  }
  CHECK(views.size() == 89);
  CHECK(rolls.size() == 7);
  CHECK(bins.size() == 6);
  CHECK(sample_template_poses(false).size() == 162u * 7 * 6);
}

TEST_CASE("pose sampler geometry") {
  const std::vector<double> rolls(std::begin(kRollDegrees), std::end(kRollDegrees));
  CHECK(rolls == std::vector<double>{-45, -30, -15, 0, 15, 30, 45});
  const std::vector<double> dists(std::begin(kTemplateDistances), std::end(kTemplateDistances));
  CHECK(dists == std::vector<double>{0.65, 0.75, 0.85, 0.95, 1.05, 1.15});
  for (const auto& p : sample_template_poses()) {
    CHECK(orthonormality_error(p.pose.rotation) < 1e-9);
    CHECK(p.pose.rotation.determinant() == doctest::Approx(1.0));
    // object origin straight ahead at the bin distance
    CHECK((p.pose.translation - Eigen::Vector3d(0, 0, p.distance)).norm() < 1e-9);
    CHECK(p.distance == kTemplateDistances[p.distance_bin]);
    // camera on the closed upper half
    CHECK(p.pose.camera_center().z() >= -1e-9);
  }
}

TEST_CASE("roll turns the image about the optical axis") {
  const Eigen::Vector3d dir = Eigen::Vector3d(0.3, -0.2, 0.9).normalized();
  const RigidPose a = view_pose(dir, 0.8, 0), b = view_pose(dir, 0.8, 30);
  CHECK((a.camera_center() - b.camera_center()).norm() < 1e-12);
  const Eigen::Matrix3d rel = b.rotation * a.rotation.transpose();
  const Eigen::AngleAxisd aa(rel);
  CHECK(aa.angle() * 180 / M_PI == doctest::Approx(30.0));
  CHECK(std::abs(std::abs(aa.axis().z()) - 1.0) < 1e-9);
}

TEST_CASE("template store round trip") {
  TemplateStore store;
  const Mesh torus = make_primitive("torus", 0.2);
  const auto poses = sample_template_poses();
  for (int i : {0, 777, 3737}) store.add(make_template(torus, default_camera(), poses[static_cast<std::size_t>(i)].pose));
  test::TempDir dir("store");
  store.save(dir.path());
  const TemplateStore back = TemplateStore::load(dir.path());
  REQUIRE(back.size() == store.size());
  for (int i = 0; i < 3; ++i) {
    const HueTemplate &a = store.at(i), &b = back.at(i);
    CHECK(a.bbox.x == b.bbox.x);
    CHECK(a.bbox.y == b.bbox.y);
    CHECK(a.bbox.width == b.bbox.width);
    CHECK(a.bbox.height == b.bbox.height);
    CHECK(a.mask == b.mask);
    CHECK((a.pose.matrix() - b.pose.matrix()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.origin - b.origin).norm() < 1e-9);
    CHECK(a.camera.fx == b.camera.fx);
    for (std::size_t k = 0; k < a.uv_map.size(); ++k)
      for (int c = 0; c < 2; ++c) CHECK(std::abs(a.uv_map.pixels()[k][c] - b.uv_map.pixels()[k][c]) <= 1.f / 65535.f);
  }
}
