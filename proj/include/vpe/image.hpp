// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vpe/catalog.hpp"
#include "vpe/common.hpp"

namespace vpe {

/// 8-bit RGB raster, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill = {255, 255, 255}) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3) {
    for (size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = fill.r;
      pixels[i + 1] = fill.g;
      pixels[i + 2] = fill.b;
    }
  }

  bool empty() const { return width == 0 || height == 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  Rgb at(int x, int y) const {
    const size_t i = (static_cast<size_t>(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }

  void set(int x, int y, Rgb c) {
    const size_t i = (static_cast<size_t>(y) * width + x) * 3;
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

inline std::string encode_png(const Image& img) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&pi, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + pi.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&pi, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + pi.message);
  }
  out.resize(size);
  return out;
}

inline Image decode_png(std::string_view bytes) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size())) {
    throw Error(std::string("png decode failed: ") + pi.message);
  }
  pi.format = PNG_FORMAT_RGB;
  Image img;
  img.width = static_cast<int>(pi.width);
  img.height = static_cast<int>(pi.height);
  img.pixels.resize(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw Error(std::string("png decode failed: ") + pi.message);
  }
  return img;
}

/// Binary PPM (P6) or PGM (P5), 8-bit.
inline Image decode_pnm(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw Error("unsupported PNM variant '" + magic + "'");
  auto next_int = [&]() {
    int v = 0;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> v;
    return v;
  };
  int w = next_int(), h = next_int(), maxval = next_int();
  in.get();
  if (w <= 0 || h <= 0 || maxval != 255) throw Error("unsupported PNM header");
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<char> raw(static_cast<size_t>(w) * h * channels);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw Error("truncated PNM data");
  Image img(w, h);
  for (size_t i = 0, n = static_cast<size_t>(w) * h; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      img.pixels[i * 3 + c] = static_cast<std::uint8_t>(raw[i * channels + (channels == 3 ? c : 0)]);
    }
  }
  return img;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("short write to " + path.string());
}

inline Image decode_image(std::string_view bytes) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), "\x89PNG", 4) == 0) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) return decode_pnm(bytes);
  throw Error("unsupported image format (expected PNG or binary PPM/PGM)");
}

inline Image load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

inline void save_png(const std::filesystem::path& path, const Image& img) { write_file(path, encode_png(img)); }

}  // namespace vpe
