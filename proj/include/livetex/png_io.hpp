#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "livetex/grid.hpp"

namespace livetex {

using Rgb8 = std::array<std::uint8_t, 3>;
using Uv16 = std::array<std::uint16_t, 2>;

/// Decodes any 8/16-bit gray, gray+alpha, RGB or RGBA PNG into RGB8
/// (alpha dropped, 16-bit reduced).
Grid<Rgb8> read_png_rgb8(const std::filesystem::path& path);
Grid<std::uint8_t> read_png_gray8(const std::filesystem::path& path);
/// Reads a 16-bit gray+alpha PNG as raw channel pairs.
Grid<Uv16> read_png_ga16(const std::filesystem::path& path);

void write_png_rgb8(const std::filesystem::path& path, const Grid<Rgb8>& image);
void write_png_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& image);
void write_png_ga16(const std::filesystem::path& path, const Grid<Uv16>& image);

RgbImage to_float(const Grid<Rgb8>& image);
Grid<Rgb8> to_rgb8(const RgbImage& image);

inline RgbImage read_png(const std::filesystem::path& path) { return to_float(read_png_rgb8(path)); }
inline void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_png_rgb8(path, to_rgb8(image));
}

}  // namespace livetex
