#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "livetex/geometry.hpp"
#include "livetex/grid.hpp"

namespace livetex::raster {

inline constexpr float kBackground = std::numeric_limits<float>::infinity();

struct RasterConfig {
  /// Depth bias floor, in normalized depth units.
  double depth_resolution = 2.0 / 65536.0;
  /// Depth jump (as a fraction of the mesh diameter) that marks an edge.
  double edge_depth_fraction = 0.10;
  /// Radius of the discarded band around edge pixels.
  int edge_dilation_px = 5;
  int texture_size = 1024;

  void validate() const;
};

/// Linear map of view depth onto [0,1].
struct DepthRange {
  double near = 0.0;
  double far = 1.0;

  double normalize(double z) const { return (z - near) / (far - near); }
  double denormalize(double d) const { return near + d * (far - near); }
};

/// Camera-space z-extent of the posed bounding box, padded by 5% on each side.
DepthRange depth_range(const Mesh& mesh, const RigidPose& pose);

struct DepthBuffer {
  PinholeCamera camera;  // the camera the buffer was rendered with
  DepthRange range;
  Grid<float> depth;   // nearest normalized depth, kBackground where empty
  Grid<float> biased;  // depth + slope-scaled bias, kBackground where empty

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
};

struct DiscontinuityMask {
  Mask valid;  // 1 = usable
  Mask edge;   // 1 = edge pixel before dilation
};

struct TexelSample {
  float x = 0.f;  // sub-pixel image coordinate in the real camera
  float y = 0.f;
  float depth = 0.f;  // normalized view depth
  float cos_alpha = 0.f;
};

struct TexelSampleMap {
  Grid<TexelSample> samples;
  Mask valid;
  std::size_t valid_count = 0;
  std::size_t degenerate_triangles = 0;
  std::size_t culled_triangles = 0;  // facing away everywhere
  // inclusive box around valid texels; empty when x0 > x1
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  int size() const { return valid.width(); }
};

struct Projection {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;
  bool behind = false;  // view depth <= 1e-9; pixel is meaningless
};

Projection project_vertex(const Eigen::Vector3d& world, const PinholeCamera& camera, const RigidPose& pose);

/// Virtual camera with the same image size whose view is zoomed onto the
/// projected bounding box (2% margin). Never zooms out. Throws
/// Error{behind_camera} when the whole box is behind the camera.
PinholeCamera focus_camera(const PinholeCamera& camera, const Mesh& mesh, const RigidPose& pose);

/// Z-buffered depth render. Each fragment keeps the nearest unbiased depth and
/// stores alongside it that depth plus max(|dd/dx|, |dd/dy|) + r, the slopes
/// taken per pixel from the triangle's screen-space plane.
DepthBuffer render_biased_depth(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                                const RasterConfig& cfg);
void render_biased_depth(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                         const RasterConfig& cfg, DepthBuffer& out);

/// A pixel is an edge when a 4-neighbour is nearer by more than
/// edge_depth_fraction * diameter (background counts as infinitely far).
/// Pixels within edge_dilation_px (Euclidean) of an edge are invalid.
DiscontinuityMask discontinuity_mask(const DepthBuffer& depth, double mesh_diameter, const RasterConfig& cfg);
void discontinuity_mask(const DepthBuffer& depth, double mesh_diameter, const RasterConfig& cfg,
                        DiscontinuityMask& out);

/// Reverse mapping: walks every mesh triangle in atlas space and records,
/// for each covered texel center, where it lands in the real image. `depth`
/// and `mask` come from the focused camera; `camera` is the real one.
TexelSampleMap rasterize_texture_space(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                                       const DepthBuffer& depth, const DiscontinuityMask& mask,
                                       const RasterConfig& cfg);
void rasterize_texture_space(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose,
                             const DepthBuffer& depth, const DiscontinuityMask& mask, const RasterConfig& cfg,
                             TexelSampleMap& out);

using Uv = std::array<float, 2>;

struct ColorRender {
  RgbImage color;
  Grid<float> depth;  // view depth, kBackground where empty
  Grid<Uv> uv;
  Mask coverage;
};

/// Forward render with bilinear texture lookup and perspective-correct UVs.
ColorRender render_color(const Mesh& mesh, const RgbImage& texture, const PinholeCamera& camera,
                         const RigidPose& pose, Rgb background = {});
/// Draws into an existing render, depth-testing against what is there.
void render_color_into(const Mesh& mesh, const RgbImage& texture, const PinholeCamera& camera,
                       const RigidPose& pose, ColorRender& target);

namespace detail {

inline constexpr int kSubpixelBits = 8;

/// Top-left-rule scan conversion of a 2D triangle over a width x height
/// lattice whose samples sit at integer coordinates. Calls
/// fragment(x, y, b0, b1, b2) with barycentrics of the unsnapped vertices.
/// Returns false for a zero-area triangle.
template <typename Fragment>
bool scan_triangle(std::array<Eigen::Vector2d, 3> p, int width, int height, Fragment&& fragment) {
  constexpr double kScale = 1 << kSubpixelBits;
  constexpr double kLimit = double(1 << 21);
  for (const auto& v : p)
    if (!(std::abs(v.x()) < kLimit && std::abs(v.y()) < kLimit)) return true;  // outside the guard band

  std::array<std::int64_t, 3> fx{}, fy{};
  for (int i = 0; i < 3; ++i) {
    fx[i] = static_cast<std::int64_t>(std::llround(p[i].x() * kScale));
    fy[i] = static_cast<std::int64_t>(std::llround(p[i].y() * kScale));
  }
  std::int64_t area = (fx[1] - fx[0]) * (fy[2] - fy[0]) - (fy[1] - fy[0]) * (fx[2] - fx[0]);
  if (area == 0) return false;
  std::array<int, 3> order{0, 1, 2};
  if (area < 0) {
    std::swap(order[1], order[2]);
    area = -area;
  }
  const std::int64_t ax = fx[order[0]], ay = fy[order[0]];
  const std::int64_t bx = fx[order[1]], by = fy[order[1]];
  const std::int64_t cx = fx[order[2]], cy = fy[order[2]];

  const std::int64_t one = std::int64_t{1} << kSubpixelBits;
  auto ceil_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); };
  auto floor_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  const int x0 = static_cast<int>(std::max<std::int64_t>(0, ceil_div(std::min({ax, bx, cx}), one)));
  const int x1 = static_cast<int>(std::min<std::int64_t>(width - 1, floor_div(std::max({ax, bx, cx}), one)));
  const int y0 = static_cast<int>(std::max<std::int64_t>(0, ceil_div(std::min({ay, by, cy}), one)));
  const int y1 = static_cast<int>(std::min<std::int64_t>(height - 1, floor_div(std::max({ay, by, cy}), one)));
  if (x0 > x1 || y0 > y1) return true;

  // Edge i is opposite vertex i. With area > 0 the interior has E > 0 on all
  // three edges, where E(p) = dx * (p.y - s.y) - dy * (p.x - s.x).
  struct Edge {
    std::int64_t dx, dy, value_row;
    bool owns_zero;  // top-left rule: exactly one of two opposite edges owns E == 0
  };
  auto make_edge = [&](std::int64_t sx, std::int64_t sy, std::int64_t ex, std::int64_t ey) {
    Edge e{};
    e.dx = ex - sx;
    e.dy = ey - sy;
    e.value_row = e.dx * (static_cast<std::int64_t>(y0) * one - sy) - e.dy * (static_cast<std::int64_t>(x0) * one - sx);
    e.owns_zero = e.dy < 0 || (e.dy == 0 && e.dx > 0);
    return e;
  };
  std::array<Edge, 3> edges{make_edge(bx, by, cx, cy), make_edge(cx, cy, ax, ay), make_edge(ax, ay, bx, by)};

  // Barycentrics from the unsnapped vertices, as affine functions of (x, y).
  const Eigen::Vector2d& pa = p[static_cast<std::size_t>(order[0])];
  const Eigen::Vector2d& pb = p[static_cast<std::size_t>(order[1])];
  const Eigen::Vector2d& pc = p[static_cast<std::size_t>(order[2])];
  const double det = (pb.x() - pa.x()) * (pc.y() - pa.y()) - (pb.y() - pa.y()) * (pc.x() - pa.x());
  if (det == 0.0) return false;
  // b_b(x,y) and b_c(x,y); b_a = 1 - b_b - b_c.
  const double bb_dx = (pc.y() - pa.y()) / det, bb_dy = -(pc.x() - pa.x()) / det;
  const double bc_dx = -(pb.y() - pa.y()) / det, bc_dy = (pb.x() - pa.x()) / det;
  const double bb_0 = -(bb_dx * pa.x() + bb_dy * pa.y());
  const double bc_0 = -(bc_dx * pa.x() + bc_dy * pa.y());
  std::array<float, 3> bary{};

  for (int y = y0; y <= y1; ++y) {
    std::int64_t w0 = edges[0].value_row, w1 = edges[1].value_row, w2 = edges[2].value_row;
    const double bb_row = bb_0 + bb_dy * y;
    const double bc_row = bc_0 + bc_dy * y;
    for (int x = x0; x <= x1; ++x) {
      const bool inside = (w0 > 0 || (w0 == 0 && edges[0].owns_zero)) && (w1 > 0 || (w1 == 0 && edges[1].owns_zero)) &&
                          (w2 > 0 || (w2 == 0 && edges[2].owns_zero));
      if (inside) {
        const double bb = bb_row + bb_dx * x;
        const double bc = bc_row + bc_dx * x;
        bary[static_cast<std::size_t>(order[1])] = static_cast<float>(bb);
        bary[static_cast<std::size_t>(order[2])] = static_cast<float>(bc);
        bary[static_cast<std::size_t>(order[0])] = static_cast<float>(1.0 - bb - bc);
        fragment(x, y, bary[0], bary[1], bary[2]);
      }
      w0 -= edges[0].dy * one;
      w1 -= edges[1].dy * one;
      w2 -= edges[2].dy * one;
    }
    edges[0].value_row += edges[0].dx * one;
    edges[1].value_row += edges[1].dx * one;
    edges[2].value_row += edges[2].dx * one;
  }
  return true;
}

}  // namespace detail

}  // namespace livetex::raster
