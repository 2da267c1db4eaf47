#pragma once

#include "inrct/core.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

namespace inrct {

namespace detail {

struct RawGray {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;
};

inline std::string extension_of(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

inline RawGray read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  auto token = [&]() {
    std::string t;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        t.push_back(ch);
        break;
      }
    }
    while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
    return t;
  };
  require(token() == "P5", path + ": only binary PGM (P5) is supported");
  RawGray g;
  g.width = std::stoi(token());
  g.height = std::stoi(token());
  g.maxval = std::stoi(token());
  require(g.width > 0 && g.height > 0, path + ": bad PGM dimensions");
  require(g.maxval > 0 && g.maxval <= 65535, path + ": bad PGM maxval");
  const std::size_t n = static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height);
  g.pixels.resize(n);
  if (g.maxval < 256) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    std::copy(buf.begin(), buf.end(), g.pixels.begin());
  } else {
    std::vector<unsigned char> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
    for (std::size_t i = 0; i < n; ++i)
      g.pixels[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  require(static_cast<bool>(in), path + ": truncated PGM");
  return g;
}

inline void write_pgm(const std::string& path, int side, const std::vector<std::uint16_t>& px, int maxval) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path);
  out << "P5\n" << side << ' ' << side << '\n' << maxval << '\n';
  for (auto v : px) {
    if (maxval < 256) {
      out.put(static_cast<char>(v));
    } else {
      out.put(static_cast<char>(v >> 8));
      out.put(static_cast<char>(v & 0xff));
    }
  }
  require(static_cast<bool>(out), "write failed: " + path);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline RawGray read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, "cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(path + ": malformed PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(path + ": only 8- or 16-bit grayscale PNG is supported");
  }
  RawGray g;
  g.width = static_cast<int>(png_get_image_width(png, info));
  g.height = static_cast<int>(png_get_image_height(png, info));
  g.maxval = depth == 16 ? 65535 : 255;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> data(rowbytes * static_cast<std::size_t>(g.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(g.height));
  for (int r = 0; r < g.height; ++r) rows[static_cast<std::size_t>(r)] = data.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  g.pixels.resize(static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height));
  for (std::size_t i = 0; i < g.pixels.size(); ++i)
    g.pixels[i] = depth == 16 ? static_cast<std::uint16_t>((data[2 * i] << 8) | data[2 * i + 1]) : data[i];
  return g;
}

inline void write_png(const std::string& path, int side, const std::vector<std::uint16_t>& px, int depth) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, "cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(path + ": PNG write failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(side), static_cast<png_uint_32>(side), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int bytes = depth / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(side * bytes));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto v = px[static_cast<std::size_t>(r) * side + c];
      if (bytes == 2) {
        row[2 * c] = static_cast<unsigned char>(v >> 8);
        row[2 * c + 1] = static_cast<unsigned char>(v & 0xff);
      } else {
        row[c] = static_cast<unsigned char>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

// Reads an 8/16-bit grayscale PGM (P5) or PNG and maps values linearly to
// [0, 1]. Non-square images are center-cropped to their shorter side.
inline ImageGrid load_grayscale(const std::string& path) {
  const std::string ext = detail::extension_of(path);
  detail::RawGray raw;
  if (ext == "pgm")
    raw = detail::read_pgm(path);
  else if (ext == "png")
    raw = detail::read_png(path);
  else
    throw Error(path + ": unsupported image format (expected .pgm or .png)");
  const int side = std::min(raw.width, raw.height);
  if (raw.width != raw.height)
    std::cerr << "warning: " << path << " is " << raw.width << "x" << raw.height << ", center-cropping to " << side
              << "x" << side << '\n';
  const int r0 = (raw.height - side) / 2;
  const int c0 = (raw.width - side) / 2;
  ImageGrid img(GridSpec::unit_square(side));
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      img(r, c) = raw.pixels[static_cast<std::size_t>(r + r0) * raw.width + (c + c0)] / double(raw.maxval);
  return img;
}

// Writes values clamped to [0, 1] at the given bit depth (8 or 16).
inline void save_grayscale(const ImageGrid& image, const std::string& path, int bit_depth = 16) {
  require(bit_depth == 8 || bit_depth == 16, "bit depth must be 8 or 16");
  const int maxval = bit_depth == 16 ? 65535 : 255;
  std::vector<std::uint16_t> px(image.spec().pixels());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = std::clamp(image.values()[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    px[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
  }
  const std::string ext = detail::extension_of(path);
  if (ext == "pgm")
    detail::write_pgm(path, image.side(), px, maxval);
  else if (ext == "png")
    detail::write_png(path, image.side(), px, bit_depth);
  else
    throw Error(path + ": unsupported image format (expected .pgm or .png)");
}

// 8-bit min-max windowed copy for quick viewing.
inline void save_preview(const ImageGrid& image, const std::string& path) {
  const double lo = image.values().minCoeff();
  const double hi = image.values().maxCoeff();
  VecD v = image.values();
  if (hi > lo)
    v = (v.array() - lo) / (hi - lo);
  else
    v.setZero();
  save_grayscale(ImageGrid(image.spec(), std::move(v)), path, 8);
}

}  // namespace inrct
