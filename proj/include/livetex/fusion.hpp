#pragma once

#include <vector>

#include "livetex/grid.hpp"
#include "livetex/raster.hpp"

namespace livetex::fusion {

/// Observation quality: max(cos_alpha, 0) * (1 - depth), depth clamped to [0,1].
inline float texel_score(float cos_alpha, float depth) {
  return std::max(cos_alpha, 0.f) * (1.f - std::clamp(depth, 0.f, 1.f));
}

/// Texel-aligned bounds [x0, x1] x [y0, y1]; empty when x0 > x1.
struct TexelRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const { return x0 > x1 || y0 > y1; }
};

/// Colors and scores observed in one frame.
struct IncrementPatch {
  RgbImage color;
  Grid<float> score;
  Mask present;
  Grid<float> weight;  // boundary blend weight, 0 where not present
  TexelRect bounds;    // tight box around present texels
  std::size_t present_count = 0;
  std::vector<std::uint8_t> scratch;  // distance transform workspace

  int size() const { return present.width(); }
};

void extract_increment(const RgbImage& frame, const raster::TexelSampleMap& samples, IncrementPatch& out);
IncrementPatch extract_increment(const RgbImage& frame, const raster::TexelSampleMap& samples);

/// Distance (in texels) from every present texel to the nearest non-present
/// one under the 5x5 chamfer metric (steps 1, sqrt(2), sqrt(5)). Texels
/// outside the grid do not count as boundary. Results are capped at `cap`;
/// non-present texels get 0.
Grid<float> boundary_distance(const Mask& present, float cap, TexelRect bounds);
Grid<float> boundary_distance(const Mask& present, float cap);

inline constexpr int kBlendRamp = 5;

/// weight = min(D / ramp, 1) for present texels.
void blend_boundaries(IncrementPatch& patch, int ramp = kBlendRamp);

/// Sets the weight of every present texel to 1.
void disable_blending(IncrementPatch& patch);

enum class MergeMode { mean, argmax };

/// The persistent texture: per texel a color and an alpha that holds the
/// summed score (mean) or the best score so far (argmax). alpha == 0 means
/// the texel was never observed.
class TextureAccumulator {
 public:
  TextureAccumulator(int size, MergeMode mode)
      : mode_(mode), color_(size, size), alpha_(size, size, 0.f) {}

  MergeMode mode() const { return mode_; }
  int size() const { return color_.width(); }
  const RgbImage& color() const { return color_; }
  const Grid<float>& alpha() const { return alpha_; }
  bool observed(int x, int y) const { return alpha_(x, y) > 0.f; }
  std::size_t observed_count() const;

  RgbImage& color() { return color_; }
  Grid<float>& alpha() { return alpha_; }

 private:
  MergeMode mode_;
  RgbImage color_;
  Grid<float> alpha_;
};

/// Running weighted mean with effective score s * weight.
void merge_mean(TextureAccumulator& acc, const IncrementPatch& patch);
/// Best-view replacement, blended by weight where the new score wins.
void merge_argmax(TextureAccumulator& acc, const IncrementPatch& patch);
/// Dispatches on acc.mode().
void merge(TextureAccumulator& acc, const IncrementPatch& patch);

/// Score channel as an 8-bit image: alpha itself for argmax, alpha / max for mean.
Grid<std::uint8_t> score_image(const TextureAccumulator& acc);

/// Accumulated texture with the patch's texels tinted blue by blend weight.
RgbImage merge_map(const TextureAccumulator& acc, const IncrementPatch& patch);

}  // namespace livetex::fusion
