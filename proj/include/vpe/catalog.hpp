// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "vpe/common.hpp"

namespace vpe {

/// Kinds of values that flow between pipeline steps.
enum class ValueKind { image, size, detections, text };

inline std::string to_string(ValueKind k) {
  switch (k) {
    case ValueKind::image: return "image";
    case ValueKind::size: return "size";
    case ValueKind::detections: return "detections";
    case ValueKind::text: return "text";
  }
  return "?";
}

enum class ParamType { integer, real, text, point, box, color, choice };

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::text;
  bool required = false;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<std::string> choices;
  std::string doc;
};

struct InputSlot {
  std::string name;
  ValueKind kind = ValueKind::image;
  bool optional = false;
  // Accepts one or more values of this kind (only valid as the last slot).
  bool variadic = false;
};

struct ToolSpec {
  std::string name;
  std::string category;
  std::string description;
  std::vector<InputSlot> inputs;
  std::vector<ParamSpec> params;
  ValueKind output = ValueKind::image;
  // Dispatched to the tool server or the model gateway.
  bool remote = false;

  const ParamSpec* param(const std::string& n) const {
    for (const auto& p : params) {
      if (p.name == n) return &p;
    }
    return nullptr;
  }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Parses "red", "#rrggbb", "rgb(r,g,b)" or [r,g,b]. Returns an error message
/// on failure.
inline std::optional<Rgb> parse_color(const json& v, std::string* error = nullptr) {
  auto fail = [&](std::string msg) -> std::optional<Rgb> {
    if (error) *error = std::move(msg);
    return std::nullopt;
  };
  auto from_ints = [&](long r, long g, long b) -> std::optional<Rgb> {
    for (long c : {r, g, b}) {
      if (c < 0 || c > 255) {
        return fail("color component " + std::to_string(c) + " outside 0..255");
      }
    }
    return Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  };
  if (v.is_array()) {
    if (v.size() != 3 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
        !v[2].is_number_integer()) {
      return fail("color array must hold three integers");
    }
    return from_ints(v[0].get<long>(), v[1].get<long>(), v[2].get<long>());
  }
  if (!v.is_string()) return fail("color must be a string or [r,g,b]");
  std::string s = text::lower(text::trim(v.get<std::string>()));
  static const std::array<std::pair<const char*, Rgb>, 11> kNamed = {{
      {"red", {255, 0, 0}},      {"green", {0, 255, 0}},   {"blue", {0, 0, 255}},
      {"black", {0, 0, 0}},      {"white", {255, 255, 255}}, {"yellow", {255, 255, 0}},
      {"cyan", {0, 255, 255}},   {"magenta", {255, 0, 255}}, {"orange", {255, 165, 0}},
      {"gray", {128, 128, 128}}, {"purple", {128, 0, 128}},
  }};
  for (const auto& [name, rgb] : kNamed) {
    if (s == name) return rgb;
  }
  static const std::regex kHex("^#([0-9a-f]{2})([0-9a-f]{2})([0-9a-f]{2})$");
  static const std::regex kRgb(R"(^rgb\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\)$)");
  std::smatch m;
  if (std::regex_match(s, m, kHex)) {
    return from_ints(std::stol(m[1], nullptr, 16), std::stol(m[2], nullptr, 16),
                     std::stol(m[3], nullptr, 16));
  }
  if (std::regex_match(s, m, kRgb)) {
    return from_ints(std::stol(m[1]), std::stol(m[2]), std::stol(m[3]));
  }
  return fail("unrecognized color '" + v.get<std::string>() + "'");
}

/// Checks one parameter value against its spec. Empty string means ok.
inline std::string check_param(const ParamSpec& spec, const json& v) {
  auto int_array = [&](size_t n) {
    if (!v.is_array() || v.size() != n) return false;
    for (const auto& e : v) {
      if (!e.is_number_integer()) return false;
    }
    return true;
  };
  auto range = [&](double x) -> std::string {
    if ((spec.min && x < *spec.min) || (spec.max && x > *spec.max)) {
      std::string lo = spec.min ? text::fixed(*spec.min, 3) : "-inf";
      std::string hi = spec.max ? text::fixed(*spec.max, 3) : "inf";
      return "value " + v.dump() + " outside range [" + lo + ", " + hi + "]";
    }
    return "";
  };
  switch (spec.type) {
    case ParamType::integer:
      if (!v.is_number_integer()) return "expected integer, got " + v.dump();
      return range(v.get<double>());
    case ParamType::real:
      if (!v.is_number()) return "expected number, got " + v.dump();
      return range(v.get<double>());
    case ParamType::text:
      if (!v.is_string()) return "expected text, got " + v.dump();
      return "";
    case ParamType::point:
      if (!int_array(2)) return "expected point [x, y] of integers, got " + v.dump();
      if (v[0].get<long>() < 0 || v[1].get<long>() < 0) return "point coordinates must be >= 0";
      return "";
    case ParamType::box:
      if (!int_array(4)) return "expected box [x0, y0, x1, y1] of integers, got " + v.dump();
      if (v[0].get<long>() < 0 || v[1].get<long>() < 0) return "box coordinates must be >= 0";
      if (v[0].get<long>() >= v[2].get<long>() || v[1].get<long>() >= v[3].get<long>()) {
        return "box must satisfy x0 < x1 and y0 < y1, got " + v.dump();
      }
      return "";
    case ParamType::color: {
      std::string err;
      if (!parse_color(v, &err)) return err;
      return "";
    }
    case ParamType::choice:
      if (!v.is_string()) return "expected one of the listed choices, got " + v.dump();
      for (const auto& c : spec.choices) {
        if (c == v.get<std::string>()) return "";
      }
      return "value '" + v.get<std::string>() + "' is not an allowed choice (" +
             text::join(spec.choices, ", ") + ")";
  }
  return "";
}

/// The visual tool catalog. Native tools run in-process; remote tools go to
/// the tool server (detection, segmentation, depth) or the target model.
class ToolCatalog {
 public:
  static const ToolCatalog& standard() {
    static const ToolCatalog catalog = build_standard();
    return catalog;
  }

  const ToolSpec* find(const std::string& name) const {
    for (const auto& t : tools_) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  const std::vector<ToolSpec>& tools() const { return tools_; }

  /// One line per tool, as given to the agents.
  std::string reference() const {
    std::vector<std::string> lines;
    for (const auto& t : tools_) {
      std::vector<std::string> sig;
      for (const auto& in : t.inputs) {
        std::string s = in.name + ": " + to_string(in.kind);
        if (in.variadic) s += "...";
        if (in.optional) s += "?";
        sig.push_back(s);
      }
      for (const auto& p : t.params) {
        sig.push_back(p.name + (p.required ? "" : "?") + "=" + p.doc);
      }
      lines.push_back(t.name + "(" + text::join(sig, ", ") + ") -> " + to_string(t.output) +
                      "  # [" + t.category + "] " + t.description);
    }
    return text::join(lines, "\n");
  }

  void add(ToolSpec spec) { tools_.push_back(std::move(spec)); }

 private:
  static ToolCatalog build_standard() {
    ToolCatalog c;
    auto img = [](const char* n) { return InputSlot{n, ValueKind::image, false, false}; };
    ParamSpec color{"color", ParamType::color, false, {}, {}, {}, "color name, #rrggbb or rgb(r,g,b); default red"};
    ParamSpec width{"width", ParamType::integer, false, 1, 64, {}, "line width in pixels 1..64; default 1"};
    ParamSpec box{"box", ParamType::box, false, {}, {}, {}, "[x0, y0, x1, y1] absolute pixels, half-open"};
    ParamSpec index{"index", ParamType::integer, false, 0, {}, {}, "which detection to use; default 0"};

    c.add({"get_image_size", "basic", "Returns image dimensions", {img("image")}, {}, ValueKind::size, false});
    c.add({"convert_image_grayscale", "basic", "Converts image to grayscale", {img("image")}, {},
           ValueKind::image, false});
    c.add({"crop",
           "basic",
           "Crops a specified region of the image (box param, or a detection input)",
           {img("image"), {"detections", ValueKind::detections, true, false}},
           {box, index,
            {"padding", ParamType::integer, false, 0, 4096, {}, "extra pixels around a detection box; default 0"}},
           ValueKind::image,
           false});
    c.add({"overlay_images",
           "basic",
           "Overlays two images",
           {img("image1"), img("image2")},
           {{"position", ParamType::point, false, {}, {}, {}, "[x, y] top-left of image2 on image1; default [0, 0]"},
            {"opacity", ParamType::real, false, 0.0, 1.0, {}, "blend weight of image2 in 0..1; default 0.5"}},
           ValueKind::image,
           false});
    c.add({"draw_line",
           "drawing",
           "Draws a line on the image",
           {img("image")},
           {{"from", ParamType::point, true, {}, {}, {}, "[x, y] start pixel"},
            {"to", ParamType::point, true, {}, {}, {}, "[x, y] end pixel"},
            color,
            width},
           ValueKind::image,
           false});
    c.add({"draw_box",
           "drawing",
           "Draws a rectangle on the image (box param, or every box of a detection input)",
           {img("image"), {"detections", ValueKind::detections, true, false}},
           {box, color, width},
           ValueKind::image,
           false});
    c.add({"draw_filled_box",
           "drawing",
           "Draws a filled rectangle on the image (box param, or every box of a detection input)",
           {img("image"), {"detections", ValueKind::detections, true, false}},
           {box, color},
           ValueKind::image,
           false});
    c.add({"detect_objects",
           "external model",
           "Object detection (open-vocabulary)",
           {img("image")},
           {{"query", ParamType::text, true, {}, {}, {}, "text query"},
            {"threshold", ParamType::real, false, 0.0, 1.0, {}, "score threshold 0..1; default 0.3"}},
           ValueKind::detections,
           true});
    c.add({"sliding_window_detection",
           "external model",
           "Sliding window object detection",
           {img("image")},
           {{"query", ParamType::text, true, {}, {}, {}, "text query"}},
           ValueKind::detections,
           true});
    c.add({"segment_and_mark",
           "external model",
           "Semantic segmentation with numbered marks drawn on the image",
           {img("image")},
           {{"granularity", ParamType::integer, false, 1, 6, {}, "segmentation level 1..6; default 2"},
            {"mark_type", ParamType::choice, false, {}, {}, {"number", "alphabet", "box", "mask"},
             "number|alphabet|box|mask; default number"}},
           ValueKind::image,
           true});
    c.add({"estimate_depth", "external model", "Depth estimation; returns a grayscale depth map",
           {img("image")}, {}, ValueKind::image, true});
    c.add({"ask_to_LVLM",
           "LVLM",
           "Sends a query to LVLM and returns response",
           {{"images", ValueKind::image, false, true}},
           {{"prompt", ParamType::text, true, {}, {}, {}, "text prompt"}},
           ValueKind::text,
           true});
    return c;
  }

  std::vector<ToolSpec> tools_;
};

}  // namespace vpe
