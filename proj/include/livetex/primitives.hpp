#pragma once

#include <string_view>

#include "livetex/geometry.hpp"

namespace livetex {

/// Square of side `size` in the z = 0 plane, normal +z, uv spanning the unit square.
Mesh make_quad(double size = 1.0);

/// Axis-aligned cube centred at the origin. Each face gets its own four
/// vertices and one cell of a 3 x 2 atlas.
Mesh make_cube(double edge = 1.0);

/// Icosahedron subdivided `levels` times (320 triangles at 2) with a
/// longitude/latitude atlas. Triangles across the seam are unwrapped and u is
/// rescaled back into [0, 1].
Mesh make_icosphere(double radius = 1.0, int levels = 2);

/// Torus around z with `rings` x `sides` quads (two triangles each).
Mesh make_torus(double major_radius = 1.0, double minor_radius = 0.35, int rings = 20, int sides = 16);

/// "quad", "cube", "icosphere" or "torus" at the size used by the synthetic
/// scenes (`scale` is the edge, diameter or outer diameter). Throws
/// Error{unknown_primitive}.
Mesh make_primitive(std::string_view name, double scale);

}  // namespace livetex
