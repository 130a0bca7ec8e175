#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace livetex {

/// Linear RGB triple, nominally in [0,1].
struct Rgb {
  float r = 0.f;
  float g = 0.f;
  float b = 0.f;

  friend Rgb operator+(Rgb a, Rgb b) { return {a.r + b.r, a.g + b.g, a.b + b.b}; }
  friend Rgb operator-(Rgb a, Rgb b) { return {a.r - b.r, a.g - b.g, a.b - b.b}; }
  friend Rgb operator*(float s, Rgb a) { return {s * a.r, s * a.g, s * a.b}; }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline float max_abs_diff(Rgb a, Rgb b) {
  return std::max({std::abs(a.r - b.r), std::abs(a.g - b.g), std::abs(a.b - b.b)});
}

/// Dense row-major 2D array. Pixel (x, y) is column x, row y.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) {
    assert(contains(x, y));
    return data_[index(x, y)];
  }
  const T& operator()(int x, int y) const {
    assert(contains(x, y));
    return data_[index(x, y)];
  }

  T* row(int y) { return data_.data() + index(0, y); }
  const T* row(int y) const { return data_.data() + index(0, y); }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Grid<Rgb>;
using Mask = Grid<std::uint8_t>;

/// Bilinear lookup with clamp-to-edge. Sample positions use the pixel-center
/// convention: integer coordinates hit pixel centers exactly.
template <typename T>
T sample_bilinear(const Grid<T>& img, float x, float y) {
  const float fx = std::clamp(x, 0.f, static_cast<float>(img.width() - 1));
  const float fy = std::clamp(y, 0.f, static_cast<float>(img.height() - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const float ax = fx - static_cast<float>(x0);
  const float ay = fy - static_cast<float>(y0);
  const T* r0 = img.row(y0);
  const T* r1 = img.row(y1);
  const T top = (1.f - ax) * r0[x0] + ax * r0[x1];
  const T bottom = (1.f - ax) * r1[x0] + ax * r1[x1];
  return (1.f - ay) * top + ay * bottom;
}

/// Texture lookup at atlas coordinate (u, v); v grows downward with image rows.
template <typename T>
T sample_uv(const Grid<T>& tex, float u, float v) {
  return sample_bilinear(tex, u * static_cast<float>(tex.width()) - 0.5f,
                         v * static_cast<float>(tex.height()) - 0.5f);
}

inline float to_unit(std::uint8_t v) { return static_cast<float>(v) / 255.f; }
inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

}  // namespace livetex
