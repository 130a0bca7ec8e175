#pragma once

#include <optional>

#include "livetex/grid.hpp"

namespace livetex::exposure {

/// Mean and (population) standard deviation of luma.
struct LumaStats {
  double mean = 0.0;
  double stddev = 0.0;
};

/// BT.601 full-range YUV.
struct Yuv {
  float y = 0.f;
  float u = 0.f;
  float v = 0.f;
};

Yuv rgb_to_yuv(Rgb c);
Rgb yuv_to_rgb(Yuv c);

inline float luma(Rgb c) { return 0.299f * c.r + 0.587f * c.g + 0.114f * c.b; }

/// Throws Error{empty_image} for an empty raster.
LumaStats luma_stats(const RgbImage& image);

struct TransferResult {
  Grid<Yuv> yuv;      // after the luma transfer and Y clamp, before RGB conversion
  bool flat = false;  // input stddev below 1e-6; mean shift only
};

/// Luma-only statistics transfer towards `ref`; U and V are carried through
/// untouched. Y is clamped to [0,1].
TransferResult transfer_luma(const RgbImage& image, const LumaStats& ref);

/// transfer_luma followed by conversion back to RGB clamped to [0,1].
RgbImage normalize_luma(const RgbImage& image, const LumaStats& ref, bool* flat = nullptr);

enum class Mode { first_frame, off };

/// Holds the reference statistics of the first frame it sees and matches
/// every later frame to them.
class Normalizer {
 public:
  explicit Normalizer(Mode mode = Mode::first_frame) : mode_(mode) {}

  Mode mode() const { return mode_; }
  const std::optional<LumaStats>& reference() const { return reference_; }

  /// Returns the frame unchanged for Mode::off and for the reference frame.
  RgbImage apply(const RgbImage& frame, bool* flat = nullptr);

 private:
  Mode mode_;
  std::optional<LumaStats> reference_;
};

}  // namespace livetex::exposure
