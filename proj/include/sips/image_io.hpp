#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "sips/core.hpp"

namespace sips {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw DataError("cannot open file: " + path);
  }
  return f;
}

// Skips PGM whitespace and '#' comment lines.
inline int pgm_next_token(std::FILE* f) {
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (!std::isspace(c)) {
      return c;
    }
    c = std::fgetc(f);
  }
  return EOF;
}

inline long pgm_read_int(std::FILE* f) {
  int c = pgm_next_token(f);
  if (c == EOF || !std::isdigit(c)) {
    throw DataError("malformed PGM header");
  }
  long value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return value;
}

}  // namespace detail

/// Raw 16-bit grayscale PNG read; used for depth maps and score maps where
/// the stored integer values carry meaning (millimeters, score/65535).
inline Grid<std::uint16_t> load_png_u16(const std::string& path) {
  detail::FilePtr file = detail::open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path);
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialization failed");
  }
  std::vector<std::uint16_t> data;
  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG: " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr,
               nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("expected 16-bit grayscale PNG: " + path);
  }
  png_set_swap(png);  // stored big-endian in the file
  data.resize(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(data.data() + std::size_t(y) * w);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Grid<std::uint16_t> grid(static_cast<int>(w), static_cast<int>(h));
  grid.raw() = std::move(data);
  return grid;
}

inline void save_png_u16(const Grid<std::uint16_t>& grid,
                         const std::string& path) {
  detail::FilePtr file = detail::open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG: " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, grid.width(), grid.height(), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  std::vector<png_bytep> rows(grid.height());
  for (int y = 0; y < grid.height(); ++y) {
    rows[y] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(grid.raw().data() +
                                   std::size_t(y) * grid.width()));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// 8- or 16-bit grayscale PNG, normalized to [0,1] by the max representable
/// value. Color or palette inputs are rejected.
inline GrayImage load_png_gray(const std::string& path) {
  detail::FilePtr file = detail::open_file(path, "rb");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path);
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialization failed");
  }
  std::vector<std::uint8_t> bytes;
  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG: " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr,
               nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY ||
      (bit_depth != 8 && bit_depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG format (need 8/16-bit grayscale): " +
                    path);
  }
  const int bytes_per_pixel = bit_depth / 8;
  bytes.resize(static_cast<std::size_t>(w) * h * bytes_per_pixel);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    rows[y] = bytes.data() + std::size_t(y) * w * bytes_per_pixel;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  if (bit_depth == 8) {
    for (std::size_t i = 0; i < img.size(); ++i) {
      img[i] = static_cast<float>(bytes[i]) / 255.0f;
    }
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const std::uint16_t v = static_cast<std::uint16_t>(
          (bytes[2 * i] << 8) | bytes[2 * i + 1]);  // PNG is big-endian
      img[i] = static_cast<float>(v) / 65535.0f;
    }
  }
  return img;
}

/// Binary PGM (P5), 8- or 16-bit, normalized by the header maxval.
inline GrayImage load_pgm(const std::string& path) {
  detail::FilePtr file = detail::open_file(path, "rb");
  int c0 = std::fgetc(file.get());
  int c1 = std::fgetc(file.get());
  if (c0 != 'P' || c1 != '5') {
    throw DataError("not a binary PGM (P5) file: " + path);
  }
  const long w = detail::pgm_read_int(file.get());
  const long h = detail::pgm_read_int(file.get());
  const long maxval = detail::pgm_read_int(file.get());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw DataError("malformed PGM header: " + path);
  }
  // pgm_read_int consumed exactly one whitespace byte after maxval.
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t pixels = img.size();
  if (maxval < 256) {
    std::vector<std::uint8_t> bytes(pixels);
    if (std::fread(bytes.data(), 1, pixels, file.get()) != pixels) {
      throw DataError("truncated PGM payload: " + path);
    }
    for (std::size_t i = 0; i < pixels; ++i) {
      img[i] = static_cast<float>(bytes[i]) / static_cast<float>(maxval);
    }
  } else {
    std::vector<std::uint8_t> bytes(pixels * 2);
    if (std::fread(bytes.data(), 1, bytes.size(), file.get()) !=
        bytes.size()) {
      throw DataError("truncated PGM payload: " + path);
    }
    for (std::size_t i = 0; i < pixels; ++i) {
      const int v = (bytes[2 * i] << 8) | bytes[2 * i + 1];  // big-endian
      img[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
  }
  return img;
}

/// Debug dump: 8-bit binary PGM, values clamped to [0,1] then scaled by 255.
template <typename T>
void save_pgm(const Grid<T>& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open file for writing: " + path);
  }
  out << "P5\n" << grid.width() << " " << grid.height() << "\n255\n";
  std::vector<std::uint8_t> bytes(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = std::clamp(static_cast<double>(grid[i]), 0.0, 1.0);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw DataError("failed to write PGM: " + path);
  }
}

/// Loads a grayscale image (PGM P5 or PNG, 8/16-bit), normalized to [0,1].
inline GrayImage load_image(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("no such file: " + path);
  }
  std::ifstream probe(path, std::ios::binary);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  GrayImage img;
  if (magic[0] == 'P' && magic[1] == '5') {
    img = load_pgm(path);
  } else if (static_cast<unsigned char>(magic[0]) == 0x89 &&
             magic[1] == 'P') {
    img = load_png_gray(path);
  } else {
    throw DataError("unsupported image format: " + path);
  }
  validate_intensities(img, path);
  return img;
}

}  // namespace sips
