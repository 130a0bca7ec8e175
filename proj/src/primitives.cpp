#include "livetex/primitives.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "livetex/error.hpp"
#include "livetex/matcher.hpp"

namespace livetex {

Mesh make_quad(double size) {
  const double h = size / 2.0;
  Mesh m;
  const Eigen::Vector3d nz = Eigen::Vector3d::UnitZ();
  m.vertices = {{{-h, -h, 0}, nz, {0, 0}}, {{h, -h, 0}, nz, {1, 0}}, {{h, h, 0}, nz, {1, 1}}, {{-h, h, 0}, nz, {0, 1}}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  finalize_mesh(m);
  return m;
}

Mesh make_cube(double edge) {
  const double h = edge / 2.0;
  struct Face {
    Eigen::Vector3d normal, u_axis, v_axis;
  };
  // v_axis points down the texture rows
  const Face faces[6] = {
      {{1, 0, 0}, {0, 1, 0}, {0, 0, -1}},  {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}}, {{0, 1, 0}, {-1, 0, 0}, {0, 0, -1}},
      {{0, -1, 0}, {1, 0, 0}, {0, 0, -1}}, {{0, 0, 1}, {1, 0, 0}, {0, -1, 0}},   {{0, 0, -1}, {1, 0, 0}, {0, 1, 0}},
  };
  Mesh m;
  for (int f = 0; f < 6; ++f) {
    const Face& face = faces[f];
    const double u0 = (f % 3) / 3.0, v0 = (f / 3) / 2.0;
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    const double corners[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    for (const auto& c : corners) {
      Vertex v;
      v.position = h * face.normal + (c[0] * 2 - 1) * h * face.u_axis + (c[1] * 2 - 1) * h * face.v_axis;
      v.normal = face.normal;
      v.uv = {u0 + c[0] / 3.0, v0 + c[1] / 2.0};
      m.vertices.push_back(v);
    }
    m.triangles.push_back({base, base + 1, base + 2});
    m.triangles.push_back({base, base + 2, base + 3});
  }
  finalize_mesh(m);
  return m;
}

Mesh make_icosphere(double radius, int levels) {
  const matcher::Icosahedron ico = matcher::subdivided_icosahedron(levels);
  const std::vector<Eigen::Vector3d>& dirs = ico.vertices;
  const std::vector<std::array<int, 3>>& faces = ico.faces;

  auto lon = [](const Eigen::Vector3d& d) { return std::atan2(d.y(), d.x()) / (2.0 * M_PI) + 0.5; };
  auto lat = [](const Eigen::Vector3d& d) { return std::acos(std::clamp(d.z(), -1.0, 1.0)) / M_PI; };

  std::vector<std::array<Eigen::Vector2d, 3>> corner_uv(faces.size());
  double u_max = 1.0;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    std::array<Eigen::Vector2d, 3> uv;
    std::array<bool, 3> pole{};
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d& d = dirs[static_cast<std::size_t>(faces[f][k])];
      pole[k] = std::hypot(d.x(), d.y()) < 1e-9;
      uv[k] = {lon(d), lat(d)};
    }
    // seam: lift the small side by one turn
    double lo = 2, hi = -1;
    for (int k = 0; k < 3; ++k)
      if (!pole[k]) lo = std::min(lo, uv[k].x()), hi = std::max(hi, uv[k].x());
    if (hi - lo > 0.5)
      for (int k = 0; k < 3; ++k)
        if (!pole[k] && uv[k].x() < 0.5) uv[k].x() += 1.0;
    for (int k = 0; k < 3; ++k) {
      if (!pole[k]) continue;
      double sum = 0;
      int cnt = 0;
      for (int j = 0; j < 3; ++j)
        if (!pole[j]) sum += uv[j].x(), ++cnt;
      uv[k].x() = cnt ? sum / cnt : 0.5;
    }
    for (const auto& p : uv) u_max = std::max(u_max, p.x());
    corner_uv[f] = uv;
  }

  Mesh m;
  std::map<std::tuple<int, double, double>, std::uint32_t> ids;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    Triangle tri{};
    for (int k = 0; k < 3; ++k) {
      const int vi = faces[f][k];
      Eigen::Vector2d uv = corner_uv[f][k];
      uv.x() /= u_max;
      auto [it, inserted] = ids.try_emplace({vi, uv.x(), uv.y()}, static_cast<std::uint32_t>(m.vertices.size()));
      if (inserted) {
        const Eigen::Vector3d& d = dirs[static_cast<std::size_t>(vi)];
        m.vertices.push_back({radius * d, d, uv});
      }
      tri[k] = it->second;
    }
    m.triangles.push_back(tri);
  }
  finalize_mesh(m);
  return m;
}

Mesh make_torus(double major_radius, double minor_radius, int rings, int sides) {
  if (rings < 3 || sides < 3 || !(minor_radius > 0) || !(major_radius > minor_radius))
    throw Error(ErrorCode::invalid_argument, "torus needs rings, sides >= 3 and major > minor > 0");
  Mesh m;
  for (int i = 0; i <= rings; ++i) {
    const double a = 2.0 * M_PI * i / rings;
    for (int j = 0; j <= sides; ++j) {
      const double b = 2.0 * M_PI * j / sides;
      const Eigen::Vector3d radial(std::cos(a), std::sin(a), 0.0);
      const Eigen::Vector3d normal = std::cos(b) * radial + std::sin(b) * Eigen::Vector3d::UnitZ();
      m.vertices.push_back({major_radius * radial + minor_radius * normal, normal,
                            {static_cast<double>(i) / rings, static_cast<double>(j) / sides}});
    }
  }
  const auto stride = static_cast<std::uint32_t>(sides + 1);
  for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(rings); ++i) {
    for (std::uint32_t j = 0; j < static_cast<std::uint32_t>(sides); ++j) {
      const std::uint32_t a = i * stride + j, b = (i + 1) * stride + j;
      m.triangles.push_back({a, b, b + 1});
      m.triangles.push_back({a, b + 1, a + 1});
    }
  }
  finalize_mesh(m);
  return m;
}

Mesh make_primitive(std::string_view name, double scale) {
  if (name == "quad") return make_quad(scale);
  if (name == "cube") return make_cube(scale);
  if (name == "icosphere") return make_icosphere(scale / 2.0, 2);
  if (name == "torus") return make_torus(scale * 0.5 * 0.7, scale * 0.5 * 0.3, 20, 16);
  throw Error(ErrorCode::unknown_primitive, "unknown primitive '" + std::string(name) + "'");
}

}  // namespace livetex
