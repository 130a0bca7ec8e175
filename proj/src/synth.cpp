#include "livetex/synth.hpp"

#include <cmath>
#include <map>
#include <random>

#include "livetex/error.hpp"
#include "livetex/matcher.hpp"
#include "livetex/png_io.hpp"
#include "livetex/primitives.hpp"
#include "livetex/raster.hpp"
#include "livetex/scene_io.hpp"

namespace livetex {

PinholeCamera default_camera() { return {572.4, 573.6, 325.3, 242.0, 640, 480}; }

RgbImage checkerboard_texture(int size, int cells, Rgb a, Rgb b) {
  if (size <= 0 || cells <= 0) throw Error(ErrorCode::invalid_argument, "checkerboard needs size, cells > 0");
  RgbImage out(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out(x, y) = ((x * cells / size) + (y * cells / size)) % 2 ? b : a;
  return out;
}

RgbImage noise_texture(int size, std::uint64_t seed, int grid) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(0.f, 1.f);
  RgbImage coarse(grid, grid);
  for (auto& c : coarse.pixels()) c = {unit(rng), unit(rng), unit(rng)};
  RgbImage out(size, size);
  const float scale = static_cast<float>(grid) / static_cast<float>(size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      out(x, y) = sample_bilinear(coarse, (static_cast<float>(x) + 0.5f) * scale - 0.5f,
                                  (static_cast<float>(y) + 0.5f) * scale - 0.5f);
  return out;
}

RgbImage banded_texture(int size, Rgb base) {
  RgbImage out(size, size, base);
  for (int y = size * 45 / 100; y < size * 55 / 100; ++y)
    for (int x = 0; x < size; ++x) out(x, y) = {0.04f, 0.04f, 0.04f};
  return out;
}

RgbImage clutter_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(0.f, 1.f);
  RgbImage out(width, height, Rgb{0.2f, 0.2f, 0.22f});
  const int blobs = width * height / 120;
  for (int i = 0; i < blobs; ++i) {
    const int w = 4 + static_cast<int>(unit(rng) * 14), h = 4 + static_cast<int>(unit(rng) * 14);
    const int x0 = static_cast<int>(unit(rng) * static_cast<float>(width));
    const int y0 = static_cast<int>(unit(rng) * static_cast<float>(height));
    // random HSV, all hues equally likely
    const float hue = unit(rng) * 6.f, s = 0.3f + 0.7f * unit(rng), v = 0.2f + 0.8f * unit(rng);
    const int sector = static_cast<int>(hue) % 6;
    const float f = hue - std::floor(hue);
    const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    const Rgb table[6] = {{v, t, p}, {q, v, p}, {p, v, t}, {p, q, v}, {t, p, v}, {v, p, q}};
    const Rgb c = table[sector];
    for (int y = y0; y < std::min(height, y0 + h); ++y)
      for (int x = x0; x < std::min(width, x0 + w); ++x) out(x, y) = c;
  }
  return out;
}

std::vector<RigidPose> orbit_poses(int count, double radius, double elevation_deg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
  const double el = elevation_deg * M_PI / 180.0;
  std::vector<RigidPose> out;
  for (int i = 0; i < count; ++i) {
    const double az = phase + 2.0 * M_PI * i / std::max(count, 1);
    const Eigen::Vector3d eye = radius * Eigen::Vector3d(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el));
    out.push_back(RigidPose::look_at(eye, Eigen::Vector3d::Zero()));
  }
  return out;
}

namespace {

RgbImage scene_texture(const SceneSpec& spec) {
  if (spec.texture_override) return *spec.texture_override;
  if (spec.texture == "checkerboard") return checkerboard_texture(spec.texture_size, spec.checker_cells);
  if (spec.texture == "noise") return noise_texture(spec.texture_size, spec.seed);
  if (spec.texture == "image") {
    RgbImage img = read_png(spec.texture_image);
    if (img.width() != img.height()) throw Error(ErrorCode::invalid_argument, "texture image must be square");
    return img;
  }
  throw Error(ErrorCode::invalid_argument, "unknown texture kind '" + spec.texture + "'");
}

/// The 8-bit round trip the frames go through on disk.
RgbImage quantize(const RgbImage& img) { return to_float(to_rgb8(img)); }

}  // namespace

SyntheticSequence make_sequence(const SceneSpec& spec) {
  if (spec.frames < 0) throw Error(ErrorCode::invalid_argument, "frame count must be >= 0");
  SyntheticSequence seq;
  seq.mesh = make_primitive(spec.primitive, spec.scale);
  seq.texture = quantize(scene_texture(spec));
  seq.camera = spec.camera;
  seq.poses = orbit_poses(spec.frames, spec.orbit_radius, spec.orbit_elevation_deg, spec.seed);
  for (const auto& pose : seq.poses)
    seq.frames.push_back(
        quantize(raster::render_color(seq.mesh, seq.texture, seq.camera, pose, spec.background).color));
  return seq;
}

void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) write_png(frame_path(dir, static_cast<int>(i)), seq.frames[i]);
  write_poses(dir / "poses.txt", seq.poses);
  write_camera(dir / "camera.txt", seq.camera);
  write_mesh(dir / "mesh.obj", seq.mesh);
  write_png(dir / "gt_texture.png", seq.texture);
  std::vector<GroundTruthInstance> gt;
  for (std::size_t i = 0; i < seq.poses.size(); ++i) gt.push_back({static_cast<int>(i), "object", seq.poses[i]});
  write_ground_truth(dir / "gt.jsonl", gt);
}

void generate_synthetic_scene(const SceneSpec& spec, const std::filesystem::path& dir) {
  write_sequence(dir, make_sequence(spec));
}

namespace {

struct Box2 {
  int x0, y0, x1, y1;  // inclusive-exclusive
  bool overlaps(const Box2& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
};

}  // namespace

DetectionSceneSummary generate_detection_scene(const DetectionSceneSpec& spec, const std::filesystem::path& dir) {
  if (spec.test_views < 0 || !(spec.spurious_fraction >= 0.0 && spec.spurious_fraction < 1.0))
    throw Error(ErrorCode::invalid_argument, "bad detection scene parameters");
  std::filesystem::create_directories(dir);
  const PinholeCamera cam = spec.camera;
  const Mesh mesh = make_cube(spec.object_edge);
  write_mesh(dir / "mesh.obj", mesh);

  struct Instance {
    std::string id;
    RgbImage texture;
  };
  const std::vector<Instance> instances = {
      {"red", quantize(banded_texture(spec.texture_size, {0.85f, 0.1f, 0.1f}))},
      {"white", quantize(banded_texture(spec.texture_size, {0.95f, 0.95f, 0.95f}))},
  };

  for (std::size_t k = 0; k < instances.size(); ++k) {
    SceneSpec s;
    s.primitive = "cube";
    s.scale = spec.object_edge;
    s.frames = spec.recon_frames;
    s.seed = spec.seed + 100 + k;
    s.orbit_radius = 0.45;
    s.orbit_elevation_deg = 35.0;
    s.camera = cam;
    s.texture_override = instances[k].texture;
    write_sequence(dir / ("recon_" + instances[k].id), make_sequence(s));
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<matcher::TemplatePose> poses = matcher::sample_template_poses(true);
  matcher::TemplateStore store;
  std::map<std::size_t, int> store_id;  // pose index -> template id
  auto template_for = [&](std::size_t pose_index) {
    auto it = store_id.find(pose_index);
    if (it != store_id.end()) return it->second;
    const int id = store.add(matcher::make_template(mesh, cam, poses[pose_index].pose));
    store_id.emplace(pose_index, id);
    return id;
  };

  std::vector<GroundTruthInstance> gt;
  std::vector<FrameCandidate> candidates;
  std::vector<std::vector<Box2>> occupied(static_cast<std::size_t>(spec.test_views));
  std::filesystem::create_directories(dir / "test");
  write_camera(dir / "test" / "camera.txt", cam);

  DetectionSceneSummary summary;
  for (int f = 0; f < spec.test_views; ++f) {
    raster::ColorRender target;
    target.color = clutter_image(cam.width, cam.height, spec.seed * 1000 + static_cast<std::uint64_t>(f));
    target.depth = Grid<float>(cam.width, cam.height, raster::kBackground);
    target.uv = Grid<raster::Uv>(cam.width, cam.height);
    target.coverage = Mask(cam.width, cam.height, 0);

    const bool red_left = unit(rng) < 0.5;
    for (std::size_t k = 0; k < instances.size(); ++k) {
      const bool left = (k == 0) == red_left;
      for (int attempt = 0;; ++attempt) {
        if (attempt > 200) throw Error(ErrorCode::invalid_argument, "could not place instance in test view");
        const auto pose_index = static_cast<std::size_t>(unit(rng) * static_cast<double>(poses.size()));
        const double u = cam.cx + (left ? -1.0 : 1.0) * (140.0 + 40.0 * unit(rng));
        const double v = cam.cy + 60.0 * (unit(rng) - 0.5);
        const Eigen::Vector3d ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
        const Eigen::Matrix3d rot =
            Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), ray.normalized()).toRotationMatrix();
        const RigidPose pose = RigidPose{rot, Eigen::Vector3d::Zero()} * poses[pose_index].pose;

        const int tid = template_for(pose_index);
        const matcher::HueTemplate& tpl = store.at(tid);
        const Eigen::Vector2d top_left = cam.project(pose.translation) - tpl.origin;
        matcher::Candidate c;
        c.template_id = tid;
        c.x = static_cast<int>(std::lround(top_left.x()));
        c.y = static_cast<int>(std::lround(top_left.y()));
        c.depth_bin = poses[pose_index].distance_bin;
        c.score = 0.55 + 0.45 * unit(rng);
        const Box2 box{c.x, c.y, c.x + tpl.bbox.width, c.y + tpl.bbox.height};
        if (box.x0 < 0 || box.y0 < 0 || box.x1 > cam.width || box.y1 > cam.height) continue;
        bool clash = false;
        for (const Box2& o : occupied[static_cast<std::size_t>(f)]) clash = clash || o.overlaps(box);
        if (clash) continue;

        occupied[static_cast<std::size_t>(f)].push_back(box);
        raster::render_color_into(mesh, instances[k].texture, cam, pose, target);
        gt.push_back({f, instances[k].id, pose});
        candidates.push_back({f, c});
        ++summary.true_candidates;
        break;
      }
    }
    write_png(frame_path(dir / "test", f), target.color);
  }

  // Spurious detections land on clutter, away from both objects.
  const double p = spec.spurious_fraction;
  const auto spurious = static_cast<std::size_t>(
      std::lround(static_cast<double>(summary.true_candidates) * p / (1.0 - p)));
  for (std::size_t s = 0; s < spurious && spec.test_views > 0 && !store.empty(); ++s) {
    const int f = static_cast<int>(unit(rng) * spec.test_views) % spec.test_views;
    for (int attempt = 0; attempt < 500; ++attempt) {
      const int tid = static_cast<int>(unit(rng) * static_cast<double>(store.size())) % static_cast<int>(store.size());
      const matcher::HueTemplate& tpl = store.at(tid);
      if (tpl.bbox.width >= cam.width || tpl.bbox.height >= cam.height) continue;
      matcher::Candidate c;
      c.template_id = tid;
      c.x = static_cast<int>(unit(rng) * (cam.width - tpl.bbox.width));
      c.y = static_cast<int>(unit(rng) * (cam.height - tpl.bbox.height));
      c.score = 0.5 + 0.5 * unit(rng);
      c.depth_bin = static_cast<int>(unit(rng) * 6) % 6;
      const Box2 box{c.x, c.y, c.x + tpl.bbox.width, c.y + tpl.bbox.height};
      bool clash = false;
      for (const Box2& o : occupied[static_cast<std::size_t>(f)]) clash = clash || o.overlaps(box);
      if (clash) continue;
      candidates.push_back({f, c});
      ++summary.spurious_candidates;
      break;
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const FrameCandidate& a, const FrameCandidate& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.candidate.score > b.candidate.score;
  });

  write_ground_truth(dir / "gt.jsonl", gt);
  write_candidates(dir / "candidates.jsonl", candidates);
  store.save(dir / "templates");
  summary.frames = static_cast<std::size_t>(spec.test_views);
  summary.templates = store.size();
  return summary;
}

}  // namespace livetex
