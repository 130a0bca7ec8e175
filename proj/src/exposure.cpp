#include "livetex/exposure.hpp"

#include <cmath>

#include "livetex/error.hpp"

namespace livetex::exposure {
namespace {

constexpr float kWr = 0.299f;
constexpr float kWg = 0.587f;
constexpr float kWb = 0.114f;
constexpr float kUScale = 0.492111f;  // 0.436 / (1 - kWb)
constexpr float kVScale = 0.877283f;  // 0.615 / (1 - kWr)

}  // namespace

Yuv rgb_to_yuv(Rgb c) {
  const float y = kWr * c.r + kWg * c.g + kWb * c.b;
  return {y, kUScale * (c.b - y), kVScale * (c.r - y)};
}

Rgb yuv_to_rgb(Yuv c) {
  const float b = c.y + c.u / kUScale;
  const float r = c.y + c.v / kVScale;
  const float g = (c.y - kWr * r - kWb * b) / kWg;
  return {r, g, b};
}

LumaStats luma_stats(const RgbImage& image) {
  if (image.empty()) throw Error(ErrorCode::empty_image, "luma statistics of an empty image");
  double sum = 0.0;
  double sum2 = 0.0;
  for (const Rgb& c : image.pixels()) {
    const double y = luma(c);
    sum += y;
    sum2 += y * y;
  }
  const double n = static_cast<double>(image.size());
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sum2 / n - mean * mean))};
}

TransferResult transfer_luma(const RgbImage& image, const LumaStats& ref) {
  const LumaStats in = luma_stats(image);
  TransferResult out;
  out.flat = in.stddev < 1e-6;
  const double gain = out.flat ? 1.0 : ref.stddev / in.stddev;
  const double offset = ref.mean - gain * in.mean;
  out.yuv = Grid<Yuv>(image.width(), image.height());
  auto src = image.pixels();
  auto dst = out.yuv.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    Yuv p = rgb_to_yuv(src[i]);
    p.y = static_cast<float>(std::clamp(gain * p.y + offset, 0.0, 1.0));
    dst[i] = p;
  }
  return out;
}

RgbImage normalize_luma(const RgbImage& image, const LumaStats& ref, bool* flat) {
  const TransferResult t = transfer_luma(image, ref);
  if (flat) *flat = t.flat;
  RgbImage out(image.width(), image.height());
  auto src = t.yuv.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Rgb c = yuv_to_rgb(src[i]);
    dst[i] = {std::clamp(c.r, 0.f, 1.f), std::clamp(c.g, 0.f, 1.f), std::clamp(c.b, 0.f, 1.f)};
  }
  return out;
}

RgbImage Normalizer::apply(const RgbImage& frame, bool* flat) {
  if (flat) *flat = false;
  if (mode_ == Mode::off) return frame;
  if (!reference_) {
    reference_ = luma_stats(frame);
    return frame;
  }
  return normalize_luma(frame, *reference_, flat);
}

}  // namespace livetex::exposure
