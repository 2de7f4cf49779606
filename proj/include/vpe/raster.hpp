// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>

#include "vpe/catalog.hpp"
#include "vpe/image.hpp"

// Native image operations. All coordinates are absolute pixels; boxes are
// half-open [x0, x1) x [y0, y1); anything outside the image is clipped.

namespace vpe::raster {

struct Point {
  int x = 0, y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Luma with integer weights 0.299/0.587/0.114, rounded half up; written to
/// all three channels.
inline Image grayscale(const Image& in) {
  Image out = in;
  for (size_t i = 0; i < out.pixels.size(); i += 3) {
    const unsigned y = (299u * in.pixels[i] + 587u * in.pixels[i + 1] + 114u * in.pixels[i + 2] + 500u) / 1000u;
    out.pixels[i] = out.pixels[i + 1] = out.pixels[i + 2] = static_cast<std::uint8_t>(y);
  }
  return out;
}

inline Box clip(const Box& b, const Image& img) {
  return {std::clamp(b.x0, 0, img.width), std::clamp(b.y0, 0, img.height), std::clamp(b.x1, 0, img.width),
          std::clamp(b.y1, 0, img.height)};
}

inline Image crop(const Image& in, const Box& box) {
  const Box b = clip(box, in);
  if (b.width() <= 0 || b.height() <= 0) {
    throw ToolError("crop box [" + std::to_string(box.x0) + ", " + std::to_string(box.y0) + ", " +
                    std::to_string(box.x1) + ", " + std::to_string(box.y1) + "] does not intersect the " +
                    std::to_string(in.width) + "x" + std::to_string(in.height) + " image");
  }
  Image out(b.width(), b.height());
  for (int y = 0; y < b.height(); ++y) {
    std::copy_n(in.pixels.begin() + ((static_cast<size_t>(b.y0 + y) * in.width + b.x0) * 3),
                static_cast<size_t>(b.width()) * 3, out.pixels.begin() + static_cast<size_t>(y) * b.width() * 3);
  }
  return out;
}

/// Places `over` with its top-left at `pos`; each covered channel becomes
/// round((1 - opacity) * base + opacity * over).
inline Image overlay(const Image& base, const Image& over, Point pos, double opacity) {
  Image out = base;
  for (int y = 0; y < over.height; ++y) {
    for (int x = 0; x < over.width; ++x) {
      const int tx = pos.x + x, ty = pos.y + y;
      if (!out.contains(tx, ty)) continue;
      const size_t bi = (static_cast<size_t>(ty) * out.width + tx) * 3;
      const size_t oi = (static_cast<size_t>(y) * over.width + x) * 3;
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - opacity) * base.pixels[bi + c] + opacity * over.pixels[oi + c];
        out.pixels[bi + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

namespace detail {

// floor(a / b) for b > 0.
inline long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

inline void stamp(Image& img, int cx, int cy, int width, Rgb color) {
  const int lo = -(width - 1) / 2, hi = width / 2;
  for (int dy = lo; dy <= hi; ++dy) {
    for (int dx = lo; dx <= hi; ++dx) {
      if (img.contains(cx + dx, cy + dy)) img.set(cx + dx, cy + dy, color);
    }
  }
}

}  // namespace detail

/// Steps along the major axis; the minor coordinate at step t is
/// round-half-up(minor0 + delta * t / n), computed in integers. Each line
/// pixel is stamped with a width x width square.
inline Image draw_line(const Image& in, Point from, Point to, Rgb color, int width = 1) {
  Image out = in;
  const long dx = to.x - from.x, dy = to.y - from.y;
  const long n = std::max(std::labs(dx), std::labs(dy));
  if (n == 0) {
    detail::stamp(out, from.x, from.y, width, color);
    return out;
  }
  for (long t = 0; t <= n; ++t) {
    const long x = from.x + detail::floor_div(2 * dx * t + n, 2 * n);
    const long y = from.y + detail::floor_div(2 * dy * t + n, 2 * n);
    detail::stamp(out, static_cast<int>(x), static_cast<int>(y), width, color);
  }
  return out;
}

/// Outline of width `width` drawn inward from the box edges.
inline Image draw_box(const Image& in, const Box& box, Rgb color, int width = 1) {
  Image out = in;
  for (int y = std::max(box.y0, 0); y < std::min(box.y1, in.height); ++y) {
    for (int x = std::max(box.x0, 0); x < std::min(box.x1, in.width); ++x) {
      if (x < box.x0 + width || x >= box.x1 - width || y < box.y0 + width || y >= box.y1 - width) {
        out.set(x, y, color);
      }
    }
  }
  return out;
}

inline Image draw_filled_box(const Image& in, const Box& box, Rgb color) {
  Image out = in;
  for (int y = std::max(box.y0, 0); y < std::min(box.y1, in.height); ++y) {
    for (int x = std::max(box.x0, 0); x < std::min(box.x1, in.width); ++x) out.set(x, y, color);
  }
  return out;
}

}  // namespace vpe::raster
