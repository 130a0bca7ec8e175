#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "livetex/geometry.hpp"
#include "livetex/grid.hpp"

namespace livetex {

/// One posed camera frame.
struct FrameRecord {
  RgbImage image;
  RigidPose pose;
  PinholeCamera camera;
  int index = 0;
};

/// Wavefront OBJ with mandatory `vt`. Polygons are fan-triangulated and each
/// distinct (v, vt, vn) corner becomes its own Vertex. OBJ texture
/// coordinates have v pointing up; they are flipped on load so that v grows
/// with texture rows. Missing normals are computed from the faces.
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_obj(std::istream& in, const std::string& source_name = "<stream>");
void write_mesh(const std::filesystem::path& path, const Mesh& mesh);

/// `fx fy cx cy width height` on one line, or one `key value` pair per line.
PinholeCamera load_camera(const std::filesystem::path& path);
void write_camera(const std::filesystem::path& path, const PinholeCamera& camera);

/// One row-major 4x4 world-to-camera matrix per line. Blank lines and lines
/// starting with '#' are skipped. Rotations off by more than 1e-3 are
/// rejected; smaller errors are projected onto SO(3) and reported through
/// `warnings`.
std::vector<RigidPose> load_poses(const std::filesystem::path& path,
                                  std::vector<std::string>* warnings = nullptr);
void write_poses(const std::filesystem::path& path, const std::vector<RigidPose>& poses);

std::filesystem::path frame_path(const std::filesystem::path& dir, int index);

/// Streams `frame_%06d.png` images from a sequence directory together with
/// `poses.txt` and `camera.txt`. Frames are decoded lazily, in index order.
class SequenceReader {
 public:
  explicit SequenceReader(const std::filesystem::path& dir);

  std::size_t size() const { return poses_.size(); }
  const PinholeCamera& camera() const { return camera_; }
  const std::vector<RigidPose>& poses() const { return poses_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Next frame, or nullopt once the sequence is exhausted. Throws
  /// Error{frame_mismatch} if an image does not match the camera size.
  std::optional<FrameRecord> next();

 private:
  std::filesystem::path dir_;
  PinholeCamera camera_;
  std::vector<RigidPose> poses_;
  std::vector<std::string> warnings_;
  std::size_t cursor_ = 0;
};

}  // namespace livetex
