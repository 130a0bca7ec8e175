#include "livetex/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

#include "livetex/error.hpp"

namespace livetex {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::missing_uv: return "missing_uv";
    case ErrorCode::degenerate_mesh: return "degenerate_mesh";
    case ErrorCode::count_mismatch: return "count_mismatch";
    case ErrorCode::invalid_pose: return "invalid_pose";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::empty_image: return "empty_image";
    case ErrorCode::behind_camera: return "behind_camera";
    case ErrorCode::not_visible: return "not_visible";
    case ErrorCode::frame_mismatch: return "frame_mismatch";
    case ErrorCode::unknown_primitive: return "unknown_primitive";
  }
  return "unknown";
}

double max_pairwise_distance(const std::vector<Eigen::Vector3d>& points) {
  if (points.size() < 2) return 0.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  // Any pair (p, q) satisfies |p - q| <= r_p + r_q, so once the two largest
  // radii can no longer beat the best pair the scan stops.
  std::vector<std::pair<double, std::size_t>> by_radius(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) by_radius[i] = {(points[i] - centroid).norm(), i};
  std::sort(by_radius.begin(), by_radius.end(), std::greater<>());

  double best2 = 0.0;
  const double r0 = by_radius.front().first;
  for (std::size_t i = 0; i < by_radius.size(); ++i) {
    const double ri = by_radius[i].first;
    if ((ri + r0) * (ri + r0) <= best2) break;
    const Eigen::Vector3d& p = points[by_radius[i].second];
    for (std::size_t j = 0; j < i; ++j) {
      const double rj = by_radius[j].first;
      if ((ri + rj) * (ri + rj) <= best2) break;
      best2 = std::max(best2, (p - points[by_radius[j].second]).squaredNorm());
    }
  }
  return std::sqrt(best2);
}

void compute_vertex_normals(Mesh& mesh) {
  // Split vertices share a position; group them so seams stay smooth.
  std::vector<std::size_t> order(mesh.vertices.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto& pa = mesh.vertices[a].position;
    const auto& pb = mesh.vertices[b].position;
    return std::tie(pa.x(), pa.y(), pa.z()) < std::tie(pb.x(), pb.y(), pb.z());
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<std::size_t> group(mesh.vertices.size());
  std::size_t groups = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && mesh.vertices[order[i]].position != mesh.vertices[order[i - 1]].position) ++groups;
    group[order[i]] = groups;
  }
  std::vector<Eigen::Vector3d> sums(order.empty() ? 0 : groups + 1, Eigen::Vector3d::Zero());
  for (const auto& t : mesh.triangles) {
    const auto& a = mesh.vertices[t[0]].position;
    const auto& b = mesh.vertices[t[1]].position;
    const auto& c = mesh.vertices[t[2]].position;
    const Eigen::Vector3d n = (b - a).cross(c - a);  // length = 2 * area
    for (auto idx : t) sums[group[idx]] += n;
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d& s = sums[group[i]];
    const double len = s.norm();
    mesh.vertices[i].normal = len > 0 ? Eigen::Vector3d(s / len) : Eigen::Vector3d::UnitZ();
  }
}

void finalize_mesh(Mesh& mesh) {
  if (mesh.vertices.empty()) throw Error(ErrorCode::degenerate_mesh, "mesh has no vertices");
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (auto idx : mesh.triangles[t]) {
      if (idx >= mesh.vertices.size()) {
        std::ostringstream msg;
        msg << "triangle " << t << " references vertex " << idx << " of " << mesh.vertices.size();
        throw Error(ErrorCode::parse, msg.str());
      }
    }
  }
  Box box{mesh.vertices.front().position, mesh.vertices.front().position};
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) {
    box.min = box.min.cwiseMin(v.position);
    box.max = box.max.cwiseMax(v.position);
    positions.push_back(v.position);
    if (std::abs(v.normal.norm() - 1.0) > 1e-4) throw Error(ErrorCode::parse, "vertex normal is not unit length");
    if (v.uv.x() < 0.0 || v.uv.x() > 1.0 || v.uv.y() < 0.0 || v.uv.y() > 1.0)
      throw Error(ErrorCode::parse, "vertex uv outside [0,1]");
  }
  mesh.bbox = box;
  mesh.diameter = max_pairwise_distance(positions);
  if (!(mesh.diameter > 0.0)) throw Error(ErrorCode::degenerate_mesh, "all mesh vertices coincide");
}

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::invalid_argument, "focal lengths must be positive");
  if (width < 1 || height < 1) throw Error(ErrorCode::invalid_argument, "image size must be at least 1x1");
}

Eigen::Matrix4d RigidPose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double orthonormality_error(const Eigen::Matrix3d& r) {
  return std::max((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(),
                  std::abs(r.determinant() - 1.0));
}

RigidPose RigidPose::from_matrix(const Eigen::Matrix4d& m, double tolerance, bool* was_corrected) {
  if (!m.allFinite()) throw Error(ErrorCode::invalid_pose, "pose contains non-finite values");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const double err = orthonormality_error(r);
  if (err > tolerance) {
    std::ostringstream msg;
    msg << "rotation is not orthonormal (error " << err << " > " << tolerance << ")";
    throw Error(ErrorCode::invalid_pose, msg.str());
  }
  RigidPose pose;
  pose.translation = m.topRightCorner<3, 1>();
  pose.rotation = err > 0.0 ? nearest_rotation(r) : r;
  if (was_corrected) *was_corrected = err > 1e-12;
  return pose;
}

RigidPose RigidPose::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                             const Eigen::Vector3d& up) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = z.cross(up);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  RigidPose pose;
  pose.rotation.row(0) = x.transpose();
  pose.rotation.row(1) = y.transpose();
  pose.rotation.row(2) = z.transpose();
  pose.translation = -(pose.rotation * eye);
  return pose;
}

}  // namespace livetex
