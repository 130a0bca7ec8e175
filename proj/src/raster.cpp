#include "livetex/raster.hpp"

#include <cmath>
#include <vector>

#include "livetex/error.hpp"

namespace livetex::raster {

void RasterConfig::validate() const {
  if (!(depth_resolution > 0.0)) throw Error(ErrorCode::invalid_argument, "depth resolution must be positive");
  if (!(edge_depth_fraction > 0.0 && edge_depth_fraction < 1.0))
    throw Error(ErrorCode::invalid_argument, "edge depth fraction must lie in (0,1)");
  if (edge_dilation_px < 0) throw Error(ErrorCode::invalid_argument, "edge dilation must be non-negative");
  if (texture_size < 16) throw Error(ErrorCode::invalid_argument, "texture size must be at least 16");
}

DepthRange depth_range(const Mesh& mesh, const RigidPose& pose) {
  double zmin = std::numeric_limits<double>::infinity();
  double zmax = -zmin;
  for (int i = 0; i < 8; ++i) {
    const double z = pose.apply(mesh.bbox.corner(i)).z();
    zmin = std::min(zmin, z);
    zmax = std::max(zmax, z);
  }
  // A box seen exactly edge-on has zero z-extent; fall back to a sliver of the diameter.
  const double extent = std::max(zmax - zmin, 0.01 * std::max(mesh.diameter, 1e-9));
  const double pad = 0.05 * extent;
  DepthRange range;
  range.near = std::max(zmin - pad, 1e-6);
  range.far = std::max(zmax + pad, range.near + 1e-6);
  return range;
}

Projection project_vertex(const Eigen::Vector3d& world, const PinholeCamera& camera, const RigidPose& pose) {
  const Eigen::Vector3d c = pose.apply(world);
  Projection out;
  out.depth = c.z();
  out.behind = c.z() <= 1e-9;
  if (!out.behind) out.pixel = camera.project(c);
  return out;
}

PinholeCamera focus_camera(const PinholeCamera& camera, const Mesh& mesh, const RigidPose& pose) {
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  int in_front = 0;
  for (int i = 0; i < 8; ++i) {
    const Projection p = project_vertex(mesh.bbox.corner(i), camera, pose);
    if (p.behind) continue;
    ++in_front;
    xmin = std::min(xmin, p.pixel.x());
    xmax = std::max(xmax, p.pixel.x());
    ymin = std::min(ymin, p.pixel.y());
    ymax = std::max(ymax, p.pixel.y());
  }
  if (in_front == 0) throw Error(ErrorCode::behind_camera, "object bounding box is entirely behind the camera");
  // A box straddling the image plane has no bounded projection.
  if (in_front < 8) return camera;

  constexpr double kMargin = 1.02;
  const double span_x = std::max(xmax - xmin, 1e-9) * kMargin;
  const double span_y = std::max(ymax - ymin, 1e-9) * kMargin;
  const double scale = std::min(camera.width / span_x, camera.height / span_y);
  if (scale <= 1.0) return camera;

  PinholeCamera focused = camera;
  focused.fx = camera.fx * scale;
  focused.fy = camera.fy * scale;
  const double center_x = 0.5 * (xmin + xmax);
  const double center_y = 0.5 * (ymin + ymax);
  focused.cx = 0.5 * (camera.width - 1) - scale * (center_x - camera.cx);
  focused.cy = 0.5 * (camera.height - 1) - scale * (center_y - camera.cy);
  return focused;
}

namespace {

// Splits a camera-space triangle against the plane z = z_clip; emits 0, 1 or 2
// triangles.
template <typename Emit>
void clip_near(const std::array<Eigen::Vector3d, 3>& tri, double z_clip, Emit&& emit) {
  std::array<Eigen::Vector3d, 4> out{};
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d& a = tri[static_cast<std::size_t>(i)];
    const Eigen::Vector3d& b = tri[static_cast<std::size_t>((i + 1) % 3)];
    const bool a_in = a.z() >= z_clip;
    const bool b_in = b.z() >= z_clip;
    if (a_in) out[static_cast<std::size_t>(n++)] = a;
    if (a_in != b_in) {
      const double t = (z_clip - a.z()) / (b.z() - a.z());
      out[static_cast<std::size_t>(n++)] = a + t * (b - a);
    }
  }
  if (n >= 3) emit(std::array<Eigen::Vector3d, 3>{out[0], out[1], out[2]});
  if (n == 4) emit(std::array<Eigen::Vector3d, 3>{out[0], out[2], out[3]});
}

double clip_plane(const DepthRange& range) { return std::max(range.near * 0.5, 1e-6); }

}  // namespace

void render_biased_depth(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                         const RasterConfig& cfg, DepthBuffer& out) {
  out.camera = camera;
  out.range = depth_range(mesh, pose);
  if (out.depth.width() != camera.width || out.depth.height() != camera.height) {
    out.depth = Grid<float>(camera.width, camera.height, kBackground);
    out.biased = Grid<float>(camera.width, camera.height, kBackground);
  } else {
    out.depth.fill(kBackground);
    out.biased.fill(kBackground);
  }
  const double near = out.range.near;
  const double inv_range = 1.0 / (out.range.far - out.range.near);
  const double r = cfg.depth_resolution;
  const double z_clip = clip_plane(out.range);

  std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = pose.apply(mesh.vertices[i].position);

  auto draw = [&](const std::array<Eigen::Vector3d, 3>& c) {
    std::array<Eigen::Vector2d, 3> px;
    std::array<double, 3> inv_z{};
    for (std::size_t k = 0; k < 3; ++k) {
      px[k] = camera.project(c[k]);
      inv_z[k] = 1.0 / c[k].z();
    }
    // 1/z is affine in screen space: inv_z(x,y) = inv_z0 + a (x - x0) + b (y - y0).
    const double det = (px[1].x() - px[0].x()) * (px[2].y() - px[0].y()) -
                       (px[1].y() - px[0].y()) * (px[2].x() - px[0].x());
    if (det == 0.0) return;
    const double d1 = inv_z[1] - inv_z[0];
    const double d2 = inv_z[2] - inv_z[0];
    const double a = (d1 * (px[2].y() - px[0].y()) - d2 * (px[1].y() - px[0].y())) / det;
    const double b = (d2 * (px[1].x() - px[0].x()) - d1 * (px[2].x() - px[0].x())) / det;
    const double slope_scale = std::max(std::abs(a), std::abs(b)) * inv_range;
    const double x0 = px[0].x(), y0 = px[0].y(), iz0 = inv_z[0];

    detail::scan_triangle(px, camera.width, camera.height, [&](int x, int y, float, float, float) {
      const double iz = iz0 + a * (x - x0) + b * (y - y0);
      if (!(iz > 0.0)) return;
      const double z = 1.0 / iz;
      const float d = static_cast<float>((z - near) * inv_range);
      float& slot = out.depth(x, y);
      if (d < slot) {
        slot = d;
        // d(normalized depth)/dx = -(a / iz^2) / (far - near)
        out.biased(x, y) = static_cast<float>((z - near) * inv_range + slope_scale * z * z + r);
      }
    });
  };

  for (const auto& t : mesh.triangles) {
    std::array<Eigen::Vector3d, 3> c{cam[t[0]], cam[t[1]], cam[t[2]]};
    if (c[0].z() >= z_clip && c[1].z() >= z_clip && c[2].z() >= z_clip)
      draw(c);
    else
      clip_near(c, z_clip, draw);
  }
}

DepthBuffer render_biased_depth(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                                const RasterConfig& cfg) {
  DepthBuffer out;
  render_biased_depth(mesh, camera, pose, cfg, out);
  return out;
}

void discontinuity_mask(const DepthBuffer& depth, double mesh_diameter, const RasterConfig& cfg,
                        DiscontinuityMask& out) {
  const int w = depth.width();
  const int h = depth.height();
  if (out.valid.width() != w || out.valid.height() != h) {
    out.valid = Mask(w, h, 1);
    out.edge = Mask(w, h, 0);
  } else {
    out.valid.fill(1);
    out.edge.fill(0);
  }
  // Compare in normalized units: the map from view depth is affine.
  const double threshold = cfg.edge_depth_fraction * mesh_diameter / (depth.range.far - depth.range.near);
  const float thr = static_cast<float>(threshold);

  std::vector<std::pair<int, int>> edges;
  for (int y = 0; y < h; ++y) {
    const float* row = depth.depth.row(y);
    for (int x = 0; x < w; ++x) {
      const float z = row[x];
      auto nearer = [&](int nx, int ny) {
        const float q = depth.depth(nx, ny);
        return q != kBackground && (z == kBackground || z - q > thr);
      };
      const bool is_edge = (x > 0 && nearer(x - 1, y)) || (x + 1 < w && nearer(x + 1, y)) ||
                           (y > 0 && nearer(x, y - 1)) || (y + 1 < h && nearer(x, y + 1));
      if (is_edge) {
        out.edge(x, y) = 1;
        edges.emplace_back(x, y);
      }
    }
  }

  const int radius = cfg.edge_dilation_px;
  // Per row offset of the disc: |dx| <= half_width[dy + radius].
  std::vector<int> half_width(static_cast<std::size_t>(2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy)
    half_width[static_cast<std::size_t>(dy + radius)] = static_cast<int>(std::floor(std::sqrt(double(radius * radius - dy * dy))));
  for (auto [ex, ey] : edges) {
    for (int dy = -radius; dy <= radius; ++dy) {
      const int y = ey + dy;
      if (y < 0 || y >= h) continue;
      const int hw = half_width[static_cast<std::size_t>(dy + radius)];
      const int xa = std::max(0, ex - hw);
      const int xb = std::min(w - 1, ex + hw);
      std::uint8_t* row = out.valid.row(y);
      for (int x = xa; x <= xb; ++x) row[x] = 0;
    }
  }
}

DiscontinuityMask discontinuity_mask(const DepthBuffer& depth, double mesh_diameter, const RasterConfig& cfg) {
  DiscontinuityMask out;
  discontinuity_mask(depth, mesh_diameter, cfg, out);
  return out;
}

void rasterize_texture_space(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                             const DepthBuffer& depth, const DiscontinuityMask& mask, const RasterConfig& cfg,
                             TexelSampleMap& out) {
  const int n = cfg.texture_size;
  if (out.valid.width() != n || out.valid.height() != n) {
    out.samples = Grid<TexelSample>(n, n);
    out.valid = Mask(n, n, 0);
  } else if (out.x0 <= out.x1) {
    for (int y = out.y0; y <= out.y1; ++y) std::fill(out.valid.row(y) + out.x0, out.valid.row(y) + out.x1 + 1, 0);
  }
  out.valid_count = 0;
  out.degenerate_triangles = 0;
  out.culled_triangles = 0;
  int bx0 = n, by0 = n, bx1 = -1, by1 = -1;

  const PinholeCamera& focus = depth.camera;
  const float near = static_cast<float>(depth.range.near);
  const float inv_range = static_cast<float>(1.0 / (depth.range.far - depth.range.near));
  const float fx = static_cast<float>(camera.fx), fy = static_cast<float>(camera.fy);
  const float cx = static_cast<float>(camera.cx), cy = static_cast<float>(camera.cy);
  const float ffx = static_cast<float>(focus.fx), ffy = static_cast<float>(focus.fy);
  // +0.5 folded in so truncation rounds to the nearest pixel
  const float fcx = static_cast<float>(focus.cx) + 0.5f, fcy = static_cast<float>(focus.cy) + 0.5f;
  const float x_lo = -0.5f, y_lo = -0.5f;
  const float x_hi = static_cast<float>(camera.width) - 0.5f, y_hi = static_cast<float>(camera.height) - 0.5f;
  const float dw = static_cast<float>(depth.width()), dh = static_cast<float>(depth.height());

  std::vector<Eigen::Vector3f> cam_pos(mesh.vertices.size());
  std::vector<Eigen::Vector3f> cam_normal(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    cam_pos[i] = pose.apply(mesh.vertices[i].position).cast<float>();
    cam_normal[i] = (pose.rotation * mesh.vertices[i].normal).cast<float>();
  }

  std::size_t valid_count = 0;
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3f p0 = cam_pos[t[0]], p1 = cam_pos[t[1]], p2 = cam_pos[t[2]];
    const Eigen::Vector3f n0 = cam_normal[t[0]], n1 = cam_normal[t[1]], n2 = cam_normal[t[2]];
    // cos_alpha is -sum b_i b_j (n_i . p_j); when every term is >= 0 no point
    // of the triangle can face the camera.
    {
      bool away = true;
      for (const Eigen::Vector3f* nn : {&n0, &n1, &n2})
        for (const Eigen::Vector3f* pp : {&p0, &p1, &p2}) away = away && nn->dot(*pp) >= 0.f;
      if (away) {
        ++out.culled_triangles;
        continue;
      }
    }
    std::array<Eigen::Vector2d, 3> tex;
    for (std::size_t k = 0; k < 3; ++k) tex[k] = mesh.vertices[t[k]].uv * n - Eigen::Vector2d::Constant(0.5);

    const bool ok = detail::scan_triangle(tex, n, n, [&](int x, int y, float b0, float b1, float b2) {
      // Interpolating on the surface is exact: the atlas map is affine per triangle.
      const Eigen::Vector3f c = b0 * p0 + b1 * p1 + b2 * p2;
      if (!(c.z() > 0.f)) return;
      const float iz = 1.f / c.z();

      const float fdx = ffx * c.x() * iz + fcx;
      const float fdy = ffy * c.y() * iz + fcy;
      if (!(fdx >= 0.f && fdy >= 0.f && fdx < dw && fdy < dh)) return;
      const int dx = static_cast<int>(fdx), dy = static_cast<int>(fdy);
      const float d = (c.z() - near) * inv_range;
      if (!(d <= depth.biased(dx, dy))) return;
      if (!mask.valid(dx, dy)) return;

      const float px = fx * c.x() * iz + cx;
      const float py = fy * c.y() * iz + cy;
      if (!(px >= x_lo && py >= y_lo && px < x_hi && py < y_hi)) return;

      const Eigen::Vector3f normal = b0 * n0 + b1 * n1 + b2 * n2;
      const float facing = -normal.dot(c);
      if (!(facing > 0.f)) return;
      const float cos_alpha = facing / std::sqrt(normal.squaredNorm() * c.squaredNorm());

      out.samples(x, y) = {px, py, d, cos_alpha};
      std::uint8_t& v = out.valid(x, y);
      valid_count += v == 0;
      v = 1;
      bx0 = std::min(bx0, x);
      bx1 = std::max(bx1, x);
      by0 = std::min(by0, y);
      by1 = std::max(by1, y);
    });
    if (!ok) ++out.degenerate_triangles;
  }
  out.valid_count = valid_count;
  if (valid_count) {
    out.x0 = bx0, out.y0 = by0, out.x1 = bx1, out.y1 = by1;
  } else {
    out.x0 = 0, out.y0 = 0, out.x1 = -1, out.y1 = -1;
  }
}

TexelSampleMap rasterize_texture_space(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                                       const DepthBuffer& depth, const DiscontinuityMask& mask,
                                       const RasterConfig& cfg) {
  TexelSampleMap out;
  rasterize_texture_space(mesh, camera, pose, depth, mask, cfg, out);
  return out;
}

void render_color_into(const Mesh& mesh, const RgbImage& texture, const PinholeCamera& camera,
                       const RigidPose& pose, ColorRender& target) {
  std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = pose.apply(mesh.vertices[i].position);
  const double z_clip = 1e-6;

  struct Corner {
    Eigen::Vector3d c;
    Eigen::Vector2d uv;
  };
  auto draw = [&](const std::array<Corner, 3>& tri) {
    std::array<Eigen::Vector2d, 3> px;
    std::array<double, 3> inv_z{};
    for (std::size_t k = 0; k < 3; ++k) {
      px[k] = camera.project(tri[k].c);
      inv_z[k] = 1.0 / tri[k].c.z();
    }
    detail::scan_triangle(px, camera.width, camera.height, [&](int x, int y, float b0, float b1, float b2) {
      const double w0 = b0 * inv_z[0], w1 = b1 * inv_z[1], w2 = b2 * inv_z[2];
      const double iz = w0 + w1 + w2;
      if (!(iz > 0.0)) return;
      const float z = static_cast<float>(1.0 / iz);
      float& slot = target.depth(x, y);
      if (!(z < slot)) return;
      slot = z;
      const float u = static_cast<float>((w0 * tri[0].uv.x() + w1 * tri[1].uv.x() + w2 * tri[2].uv.x()) / iz);
      const float v = static_cast<float>((w0 * tri[0].uv.y() + w1 * tri[1].uv.y() + w2 * tri[2].uv.y()) / iz);
      target.uv(x, y) = {u, v};
      target.coverage(x, y) = 1;
      target.color(x, y) = sample_uv(texture, u, v);
    });
  };

  for (const auto& t : mesh.triangles) {
    std::array<Corner, 3> tri{};
    bool clipped = false;
    for (std::size_t k = 0; k < 3; ++k) {
      tri[k] = {cam[t[k]], mesh.vertices[t[k]].uv};
      clipped |= tri[k].c.z() < z_clip;
    }
    if (!clipped) {
      draw(tri);
      continue;
    }
    // Clip positions and carry UVs along via barycentrics of the clipped points.
    std::array<Eigen::Vector3d, 3> pos{tri[0].c, tri[1].c, tri[2].c};
    Eigen::Matrix3d basis;
    basis << pos[0], pos[1], pos[2];
    // A plane through the camera center is seen edge-on.
    if (std::abs(basis.determinant()) < 1e-18) continue;
    const Eigen::Matrix3d inv = basis.inverse();
    clip_near(pos, z_clip, [&](const std::array<Eigen::Vector3d, 3>& c) {
      std::array<Corner, 3> sub{};
      for (std::size_t k = 0; k < 3; ++k) {
        const Eigen::Vector3d w = inv * c[k];
        sub[k] = {c[k], (w[0] * tri[0].uv + w[1] * tri[1].uv + w[2] * tri[2].uv) / w.sum()};
      }
      draw(sub);
    });
  }
}

ColorRender render_color(const Mesh& mesh, const RgbImage& texture, const PinholeCamera& camera,
                         const RigidPose& pose, Rgb background) {
  ColorRender out;
  out.color = RgbImage(camera.width, camera.height, background);
  out.depth = Grid<float>(camera.width, camera.height, kBackground);
  out.uv = Grid<Uv>(camera.width, camera.height, Uv{0.f, 0.f});
  out.coverage = Mask(camera.width, camera.height, 0);
  render_color_into(mesh, texture, camera, pose, out);
  return out;
}

}  // namespace livetex::raster
