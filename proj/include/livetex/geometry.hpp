#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace livetex {

struct Box {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  Eigen::Vector3d corner(int i) const {
    return {(i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(), (i & 4) ? max.z() : min.z()};
  }
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
  double diagonal() const { return (max - min).norm(); }
};

struct Vertex {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  /// Atlas coordinate; v grows downward with texture rows.
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
};

using Triangle = std::array<std::uint32_t, 3>;

struct Mesh {
  std::vector<Vertex> vertices;
  std::vector<Triangle> triangles;
  Box bbox;
  /// Largest distance between any two vertices.
  double diameter = 0.0;
};

/// Recomputes bbox and diameter and checks the mesh invariants. Throws
/// Error{degenerate_mesh} when every vertex coincides and Error{parse} for
/// out-of-range indices, non-unit normals or UVs outside [0,1].
void finalize_mesh(Mesh& mesh);

/// Sets every vertex normal to the area-weighted average of the faces that
/// share its position.
void compute_vertex_normals(Mesh& mesh);

double max_pairwise_distance(const std::vector<Eigen::Vector3d>& points);

struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Pixel centers sit at integer coordinates.
  Eigen::Vector2d project(const Eigen::Vector3d& cam_point) const {
    return {fx * cam_point.x() / cam_point.z() + cx, fy * cam_point.y() / cam_point.z() + cy};
  }
  Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double depth) const {
    return {(pixel.x() - cx) / fx * depth, (pixel.y() - cy) / fy * depth, depth};
  }
  bool inside(double x, double y) const {
    return x >= -0.5 && y >= -0.5 && x < width - 0.5 && y < height - 0.5;
  }
  void validate() const;
};

/// World-to-camera rigid transform. The camera looks down +Z, x to the right,
/// y down the image.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& world) const { return rotation * world + translation; }
  Eigen::Vector3d camera_center() const { return -(rotation.transpose() * translation); }
  RigidPose inverse() const { return {rotation.transpose(), -(rotation.transpose() * translation)}; }
  RigidPose operator*(const RigidPose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Eigen::Matrix4d matrix() const;

  /// Builds a pose from a 4x4 world-to-camera matrix. Rotations within
  /// `tolerance` of orthonormal are projected onto SO(3); worse ones throw
  /// Error{invalid_pose}. `was_corrected` reports whether projection changed
  /// the input.
  static RigidPose from_matrix(const Eigen::Matrix4d& m, double tolerance = 1e-3,
                               bool* was_corrected = nullptr);

  /// Camera at `eye` looking at `target`; `up` fixes the roll (image y points
  /// away from it).
  static RigidPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                           const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());
};

/// Nearest rotation in the Frobenius sense (polar decomposition via SVD),
/// with det = +1.
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);

double orthonormality_error(const Eigen::Matrix3d& r);

}  // namespace livetex
