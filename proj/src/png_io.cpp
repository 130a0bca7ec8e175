#include "livetex/png_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "livetex/error.hpp"

namespace livetex {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string());
  return f;
}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;  // after expansion: 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 8;
  std::vector<std::uint8_t> bytes;
};

Decoded decode(const std::filesystem::path& path, bool keep16) {
  FilePtr file = open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw Error(ErrorCode::parse, path.string() + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::io, "libpng initialisation failed");
  }
  Decoded out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::parse, "corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) {
    if (keep16)
      png_set_swap(png);  // host order on little-endian machines
    else
      png_set_strip_16(png);
  }
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = out.bytes.data() + stride * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
            const std::vector<std::uint8_t>& bytes, std::size_t stride) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::io, "libpng initialisation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::io, "failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  for (int y = 0; y < height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(bytes.data() + stride * static_cast<std::size_t>(y));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Grid<Rgb8> read_png_rgb8(const std::filesystem::path& path) {
  const Decoded d = decode(path, false);
  Grid<Rgb8> out(d.width, d.height);
  const std::size_t c = static_cast<std::size_t>(d.channels);
  for (int y = 0; y < d.height; ++y) {
    const std::uint8_t* src = d.bytes.data() + static_cast<std::size_t>(y) * d.width * c;
    Rgb8* dst = out.row(y);
    for (int x = 0; x < d.width; ++x, src += c) {
      dst[x] = c >= 3 ? Rgb8{src[0], src[1], src[2]} : Rgb8{src[0], src[0], src[0]};
    }
  }
  return out;
}

Grid<std::uint8_t> read_png_gray8(const std::filesystem::path& path) {
  const Decoded d = decode(path, false);
  Grid<std::uint8_t> out(d.width, d.height);
  const std::size_t c = static_cast<std::size_t>(d.channels);
  for (int y = 0; y < d.height; ++y) {
    const std::uint8_t* src = d.bytes.data() + static_cast<std::size_t>(y) * d.width * c;
    for (int x = 0; x < d.width; ++x, src += c) out(x, y) = src[0];
  }
  return out;
}

Grid<Uv16> read_png_ga16(const std::filesystem::path& path) {
  const Decoded d = decode(path, true);
  if (d.bit_depth != 16 || d.channels != 2)
    throw Error(ErrorCode::parse, path.string() + " is not a 16-bit gray+alpha PNG");
  Grid<Uv16> out(d.width, d.height);
  for (int y = 0; y < d.height; ++y) {
    const std::uint8_t* src = d.bytes.data() + static_cast<std::size_t>(y) * d.width * 4;
    for (int x = 0; x < d.width; ++x, src += 4) {
      out(x, y) = {static_cast<std::uint16_t>(src[0] | (src[1] << 8)),
                   static_cast<std::uint16_t>(src[2] | (src[3] << 8))};
    }
  }
  return out;
}

void write_png_rgb8(const std::filesystem::path& path, const Grid<Rgb8>& image) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(image.size() * 3);
  for (const auto& p : image.pixels()) bytes.insert(bytes.end(), p.begin(), p.end());
  encode(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, bytes,
         static_cast<std::size_t>(image.width()) * 3);
}

void write_png_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& image) {
  std::vector<std::uint8_t> bytes(image.pixels().begin(), image.pixels().end());
  encode(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 8, bytes,
         static_cast<std::size_t>(image.width()));
}

void write_png_ga16(const std::filesystem::path& path, const Grid<Uv16>& image) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(image.size() * 4);
  for (const auto& p : image.pixels()) {
    for (auto v : p) {
      bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
      bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    }
  }
  encode(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY_ALPHA, 16, bytes,
         static_cast<std::size_t>(image.width()) * 4);
}

RgbImage to_float(const Grid<Rgb8>& image) {
  RgbImage out(image.width(), image.height());
  auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = {to_unit(src[i][0]), to_unit(src[i][1]), to_unit(src[i][2])};
  return out;
}

Grid<Rgb8> to_rgb8(const RgbImage& image) {
  Grid<Rgb8> out(image.width(), image.height());
  auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = {to_byte(src[i].r), to_byte(src[i].g), to_byte(src[i].b)};
  return out;
}

}  // namespace livetex
