#include "livetex/fusion.hpp"

#include <cmath>

#include "livetex/error.hpp"

namespace livetex::fusion {

void extract_increment(const RgbImage& frame, const raster::TexelSampleMap& samples, IncrementPatch& out) {
  const int n = samples.size();
  if (out.size() != n) {
    out.color = RgbImage(n, n);
    out.score = Grid<float>(n, n, 0.f);
    out.present = Mask(n, n, 0);
    out.weight = Grid<float>(n, n, 0.f);
  } else if (!out.bounds.empty()) {
    // Only the previous bounds can hold stale data.
    for (int y = out.bounds.y0; y <= out.bounds.y1; ++y) {
      std::fill_n(out.present.row(y) + out.bounds.x0, out.bounds.x1 - out.bounds.x0 + 1, std::uint8_t{0});
      std::fill_n(out.weight.row(y) + out.bounds.x0, out.bounds.x1 - out.bounds.x0 + 1, 0.f);
    }
  }
  TexelRect bounds{n, n, -1, -1};
  std::size_t count = 0;
  for (int y = samples.y0; y <= samples.y1; ++y) {
    const std::uint8_t* valid = samples.valid.row(y);
    const raster::TexelSample* s = samples.samples.row(y);
    for (int x = samples.x0; x <= samples.x1; ++x) {
      if (!valid[x]) continue;
      out.color(x, y) = sample_bilinear(frame, s[x].x, s[x].y);
      out.score(x, y) = texel_score(s[x].cos_alpha, s[x].depth);
      out.present(x, y) = 1;
      out.weight(x, y) = 1.f;
      bounds.x0 = std::min(bounds.x0, x);
      bounds.x1 = std::max(bounds.x1, x);
      bounds.y0 = std::min(bounds.y0, y);
      bounds.y1 = std::max(bounds.y1, y);
      ++count;
    }
  }
  out.bounds = count ? bounds : TexelRect{};
  out.present_count = count;
}

IncrementPatch extract_increment(const RgbImage& frame, const raster::TexelSampleMap& samples) {
  IncrementPatch out;
  extract_increment(frame, samples, out);
  return out;
}

namespace {

// Path length between lattice points under the 5x5 chamfer mask
// (steps 1, sqrt(2), sqrt(5)).
float chamfer_metric(int dx, int dy) {
  dx = std::abs(dx);
  dy = std::abs(dy);
  if (dx < dy) std::swap(dx, dy);
  const float b = std::sqrt(2.f), c = std::sqrt(5.f);
  if (dx >= 2 * dy) return static_cast<float>(dx - 2 * dy) + static_cast<float>(dy) * c;
  return static_cast<float>(dx - dy) * c + static_cast<float>(2 * dy - dx) * b;
}

// Calls out(x, y, d) for every present texel inside `bounds`, d being the
// chamfer distance to the nearest non-present texel of the grid, capped at
// `cap`. The metric only grows with |dx| for a fixed dy, so per window row
// the horizontally nearest zero is enough. Zeros further than ceil(cap) in
// either axis cannot beat the cap.
template <typename Out>
void capped_distance(const Mask& present, float cap, TexelRect bounds, std::vector<std::uint8_t>& buf, Out&& out) {
  const int w = present.width(), h = present.height();
  const int r = static_cast<int>(std::ceil(cap));
  const int far = r + 1;
  std::vector<float> table(static_cast<std::size_t>((r + 1) * (far + 1)));
  for (int dy = 0; dy <= r; ++dy)
    for (int dx = 0; dx <= far; ++dx) table[static_cast<std::size_t>(dy * (far + 1) + dx)] = std::min(chamfer_metric(dx, dy), cap);

  // Horizontal distance to the nearest zero for rows y0 - r .. y1 + r
  // (only those inside the grid), columns x0 .. x1, capped at `far`.
  const int cols = bounds.x1 - bounds.x0 + 1;
  const int ry0 = std::max(bounds.y0 - r, 0), ry1 = std::min(bounds.y1 + r, h - 1);
  buf.assign(static_cast<std::size_t>(cols) * static_cast<std::size_t>(ry1 - ry0 + 1), static_cast<std::uint8_t>(far));
  const int sx0 = std::max(bounds.x0 - far, 0), sx1 = std::min(bounds.x1 + far, w - 1);
  for (int y = ry0; y <= ry1; ++y) {
    std::uint8_t* hz = buf.data() + static_cast<std::ptrdiff_t>(y - ry0) * cols - bounds.x0;
    const std::uint8_t* m = present.row(y);
    int last = -1000000;
    for (int x = sx0; x <= sx1; ++x) {
      if (!m[x]) last = x;
      if (x >= bounds.x0 && x <= bounds.x1) hz[x] = static_cast<std::uint8_t>(std::min(x - last, far));
    }
    last = 1000000;
    for (int x = sx1; x >= sx0; --x) {
      if (!m[x]) last = x;
      if (x >= bounds.x0 && x <= bounds.x1) hz[x] = static_cast<std::uint8_t>(std::min<int>(std::min(last - x, far), hz[x]));
    }
  }

  // near[x] counts window rows whose zero lies within r of column x; texels
  // with a zero count are capped without looking at the window.
  const std::uint8_t reach = static_cast<std::uint8_t>(r);
  std::vector<std::uint16_t> near(static_cast<std::size_t>(cols), 0);
  auto add_row = [&](int yy, int sign) {
    if (yy < ry0 || yy > ry1) return;
    const std::uint8_t* hz = buf.data() + static_cast<std::ptrdiff_t>(yy - ry0) * cols;
    for (int i = 0; i < cols; ++i) near[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(near[static_cast<std::size_t>(i)] + sign * (hz[i] <= reach));
  };
  for (int yy = bounds.y0 - r; yy < bounds.y0 + r; ++yy) add_row(yy, 1);

  for (int y = bounds.y0; y <= bounds.y1; ++y) {
    add_row(y + r, 1);
    const std::uint8_t* m = present.row(y);
    const int dy_lo = std::max(-r, ry0 - y), dy_hi = std::min(r, ry1 - y);
    for (int x = bounds.x0; x <= bounds.x1; ++x) {
      if (!m[x]) continue;
      const std::size_t col = static_cast<std::size_t>(x - bounds.x0);
      float d = cap;
      if (near[col]) {
        for (int dy = dy_lo; dy <= dy_hi; ++dy) {
          const std::uint8_t hd = buf[static_cast<std::size_t>(y + dy - ry0) * static_cast<std::size_t>(cols) + col];
          d = std::min(d, table[static_cast<std::size_t>(std::abs(dy) * (far + 1) + hd)]);
        }
      }
      out(x, y, d);
    }
    add_row(y - r, -1);
  }
}

}  // namespace

Grid<float> boundary_distance(const Mask& present, float cap, TexelRect bounds) {
  Grid<float> dist(present.width(), present.height(), 0.f);
  if (bounds.empty() || !(cap > 0.f)) return dist;
  std::vector<std::uint8_t> buf;
  capped_distance(present, cap, bounds, buf, [&](int x, int y, float d) { dist(x, y) = d; });
  return dist;
}

Grid<float> boundary_distance(const Mask& present, float cap) {
  return boundary_distance(present, cap, TexelRect{0, 0, present.width() - 1, present.height() - 1});
}

void blend_boundaries(IncrementPatch& patch, int ramp) {
  if (patch.present_count == 0) return;
  if (ramp <= 0) {
    disable_blending(patch);
    return;
  }
  const float r = static_cast<float>(ramp);
  const float inv = 1.f / r;
  capped_distance(patch.present, r, patch.bounds, patch.scratch,
                  [&](int x, int y, float d) { patch.weight(x, y) = std::min(d * inv, 1.f); });
}

void disable_blending(IncrementPatch& patch) {
  if (patch.present_count == 0) return;
  for (int y = patch.bounds.y0; y <= patch.bounds.y1; ++y)
    for (int x = patch.bounds.x0; x <= patch.bounds.x1; ++x)
      if (patch.present(x, y)) patch.weight(x, y) = 1.f;
}

std::size_t TextureAccumulator::observed_count() const {
  std::size_t n = 0;
  for (float a : alpha_.pixels()) n += a > 0.f;
  return n;
}

namespace {

void check_sizes(const TextureAccumulator& acc, const IncrementPatch& patch, MergeMode expected) {
  if (acc.mode() != expected) throw Error(ErrorCode::invalid_argument, "accumulator merge mode mismatch");
  if (patch.present_count && patch.size() != acc.size())
    throw Error(ErrorCode::invalid_argument, "patch and accumulator sizes differ");
}

}  // namespace

void merge_mean(TextureAccumulator& acc, const IncrementPatch& patch) {
  check_sizes(acc, patch, MergeMode::mean);
  if (patch.present_count == 0) return;
  for (int y = patch.bounds.y0; y <= patch.bounds.y1; ++y) {
    const std::uint8_t* present = patch.present.row(y);
    const Rgb* c_new = patch.color.row(y);
    const float* s = patch.score.row(y);
    const float* w = patch.weight.row(y);
    Rgb* c = acc.color().row(y);
    float* a = acc.alpha().row(y);
    for (int x = patch.bounds.x0; x <= patch.bounds.x1; ++x) {
      if (!present[x]) continue;
      const double s_eff = static_cast<double>(s[x]) * w[x];
      if (!(s_eff > 0.0)) continue;
      const double a_old = a[x];
      const double total = a_old + s_eff;
      c[x] = {static_cast<float>((a_old * c[x].r + s_eff * c_new[x].r) / total),
              static_cast<float>((a_old * c[x].g + s_eff * c_new[x].g) / total),
              static_cast<float>((a_old * c[x].b + s_eff * c_new[x].b) / total)};
      a[x] = static_cast<float>(total);
    }
  }
}

void merge_argmax(TextureAccumulator& acc, const IncrementPatch& patch) {
  check_sizes(acc, patch, MergeMode::argmax);
  if (patch.present_count == 0) return;
  for (int y = patch.bounds.y0; y <= patch.bounds.y1; ++y) {
    const std::uint8_t* present = patch.present.row(y);
    const Rgb* c_new = patch.color.row(y);
    const float* s = patch.score.row(y);
    const float* w = patch.weight.row(y);
    Rgb* c = acc.color().row(y);
    float* a = acc.alpha().row(y);
    for (int x = patch.bounds.x0; x <= patch.bounds.x1; ++x) {
      if (!present[x] || !(s[x] > 0.f)) continue;
      if (a[x] == 0.f) {
        c[x] = c_new[x];
        a[x] = s[x];
      } else if (s[x] > a[x]) {
        const float wt = w[x];
        c[x] = (1.f - wt) * c[x] + wt * c_new[x];
        a[x] = (1.f - wt) * a[x] + wt * s[x];
      }
    }
  }
}

void merge(TextureAccumulator& acc, const IncrementPatch& patch) {
  if (acc.mode() == MergeMode::mean)
    merge_mean(acc, patch);
  else
    merge_argmax(acc, patch);
}

Grid<std::uint8_t> score_image(const TextureAccumulator& acc) {
  Grid<std::uint8_t> out(acc.size(), acc.size(), 0);
  float scale = 1.f;
  if (acc.mode() == MergeMode::mean) {
    float peak = 0.f;
    for (float a : acc.alpha().pixels()) peak = std::max(peak, a);
    scale = peak > 0.f ? 1.f / peak : 1.f;
  }
  auto src = acc.alpha().pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = to_byte(src[i] * scale);
  return out;
}

RgbImage merge_map(const TextureAccumulator& acc, const IncrementPatch& patch) {
  RgbImage out = acc.color();
  const Rgb blue{0.f, 0.2f, 1.f};
  if (patch.size() != acc.size() || patch.present_count == 0) return out;
  for (int y = patch.bounds.y0; y <= patch.bounds.y1; ++y) {
    for (int x = patch.bounds.x0; x <= patch.bounds.x1; ++x) {
      if (!patch.present(x, y)) continue;
      const float t = 0.75f * patch.weight(x, y);
      out(x, y) = (1.f - t) * patch.color(x, y) + t * blue;
    }
  }
  return out;
}

}  // namespace livetex::fusion
