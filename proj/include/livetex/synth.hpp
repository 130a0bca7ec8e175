#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "livetex/geometry.hpp"
#include "livetex/grid.hpp"
#include "livetex/pipeline.hpp"

namespace livetex {

/// Camera used by all synthetic scenes (Kinect-like intrinsics).
PinholeCamera default_camera();

RgbImage checkerboard_texture(int size, int cells, Rgb a = {0.85f, 0.85f, 0.85f}, Rgb b = {0.15f, 0.25f, 0.6f});
/// Smooth random colors: a coarse random grid, bilinearly upsampled.
RgbImage noise_texture(int size, std::uint64_t seed, int grid = 8);
/// Solid color with a horizontal black band through the middle of the atlas.
RgbImage banded_texture(int size, Rgb base);
/// Random small colored rectangles on a dark backdrop.
RgbImage clutter_image(int width, int height, std::uint64_t seed);

struct SceneSpec {
  std::string primitive = "cube";
  double scale = 0.2;  // meters
  std::string texture = "checkerboard";  // checkerboard | noise | image
  std::filesystem::path texture_image;   // for "image"
  int texture_size = 256;
  int checker_cells = 4;
  int frames = 12;
  std::uint64_t seed = 1;
  double orbit_radius = 0.45;
  double orbit_elevation_deg = 30.0;
  PinholeCamera camera = default_camera();
  Rgb background{0.f, 0.f, 0.f};
  std::optional<RgbImage> texture_override;
};

struct SyntheticSequence {
  Mesh mesh;
  RgbImage texture;
  PinholeCamera camera;
  std::vector<RigidPose> poses;
  std::vector<RgbImage> frames;
};

/// Evenly spaced orbit around the z axis at a fixed elevation, looking at
/// the origin. The seed only rotates the starting azimuth.
std::vector<RigidPose> orbit_poses(int count, double radius, double elevation_deg, std::uint64_t seed);

/// Throws Error{unknown_primitive} or Error{invalid_argument}.
SyntheticSequence make_sequence(const SceneSpec& spec);

/// frame_%06d.png, poses.txt, camera.txt, mesh.obj, gt_texture.png and
/// gt.jsonl (object pose per frame).
void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq);

void generate_synthetic_scene(const SceneSpec& spec, const std::filesystem::path& dir);

struct DetectionSceneSpec {
  int test_views = 20;
  double spurious_fraction = 0.3;
  std::uint64_t seed = 7;
  double object_edge = 0.12;
  int texture_size = 256;
  int recon_frames = 12;
  PinholeCamera camera = default_camera();
};

struct DetectionSceneSummary {
  std::size_t frames = 0;
  std::size_t templates = 0;
  std::size_t true_candidates = 0;
  std::size_t spurious_candidates = 0;
};

/// Two cubes, one red and one white, side by side on clutter. Writes:
///   recon_red/, recon_white/  orbit sequences of each instance
///   test/                     frames and camera.txt
///   gt.jsonl, candidates.jsonl, templates/, mesh.obj
DetectionSceneSummary generate_detection_scene(const DetectionSceneSpec& spec, const std::filesystem::path& dir);

}  // namespace livetex
