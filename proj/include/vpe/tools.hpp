// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

#include "vpe/catalog.hpp"
#include "vpe/common.hpp"
#include "vpe/image.hpp"
#include "vpe/raster.hpp"

// Values flowing between pipeline steps, the external-model tool interface,
// and its wire format.
//
// Wire format (tool server):
//   POST /v1/tools/{name}   {"image": <base64 PNG>, "params": {...}}
//   200 -> {"tool", "server_mode": "stub"|"real", "model_version", ...payload}
//     detect_objects, sliding_window_detection:
//       "detections": [{"box": [x0, y0, x1, y1], "label": str, "score": 0..1}]
//     segment_and_mark: "image": <base64 PNG>, "regions": [{"id": int, "box": [...]}]
//     estimate_depth:   "image": <base64 PNG, same size as the input>
//   4xx -> {"error": {"code", "message", "allowed"?}}
//   GET /healthz -> {"status": "ok", "mode": "stub"|"real", "model_versions": {...}}

namespace vpe {

struct Detection {
  raster::Box box;
  std::string label;
  double score = 0.0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ImageSize {
  int width = 0, height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

using Detections = std::vector<Detection>;
using Value = std::variant<Image, ImageSize, Detections, std::string>;

inline ValueKind kind_of(const Value& v) {
  switch (v.index()) {
    case 0: return ValueKind::image;
    case 1: return ValueKind::size;
    case 2: return ValueKind::detections;
    default: return ValueKind::text;
  }
}

/// Text form of a non-image value, as substituted into answer templates.
inline std::string value_text(const Value& v) {
  if (const auto* s = std::get_if<ImageSize>(&v)) {
    return std::to_string(s->width) + "x" + std::to_string(s->height);
  }
  if (const auto* d = std::get_if<Detections>(&v)) {
    if (d->empty()) return "(no detections)";
    std::vector<std::string> parts;
    for (const auto& det : *d) {
      parts.push_back("[" + std::to_string(det.box.x0) + ", " + std::to_string(det.box.y0) + ", " +
                      std::to_string(det.box.x1) + ", " + std::to_string(det.box.y1) + "] " + det.label +
                      " (" + text::fixed(det.score, 2) + ")");
    }
    return text::join(parts, "; ");
  }
  if (const auto* t = std::get_if<std::string>(&v)) return *t;
  return "<image>";
}

inline json box_json(const raster::Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

inline json detection_json(const Detection& d) {
  return json{{"box", box_json(d.box)}, {"label", d.label}, {"score", d.score}};
}

/// External-model tools (detection, segmentation, depth).
class ToolClient {
 public:
  virtual ~ToolClient() = default;
  virtual Value call(const std::string& tool, const Image& image, const json& params) = 0;
  virtual std::string fingerprint() const = 0;
  virtual json health() = 0;
};

inline json make_tool_request(const Image& image, const json& params) {
  return json{{"image", base64_encode(encode_png(image))}, {"params", params.is_null() ? json::object() : params}};
}

namespace detail {

inline raster::Box parse_box(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw ToolError(where + ": box must be [x0, y0, x1, y1]");
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw ToolError(where + ": box coordinates must be integers");
  }
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

inline void check_box_in(const raster::Box& b, const Image& img, const std::string& where) {
  if (b.x0 < 0 || b.y0 < 0 || b.x1 > img.width || b.y1 > img.height || b.x0 >= b.x1 || b.y0 >= b.y1) {
    throw ToolError(where + ": box [" + std::to_string(b.x0) + ", " + std::to_string(b.y0) + ", " +
                    std::to_string(b.x1) + ", " + std::to_string(b.y1) + "] is not inside the " +
                    std::to_string(img.width) + "x" + std::to_string(img.height) + " image");
  }
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ToolError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline Image decode_payload_image(const json& v, const std::string& where) {
  if (!v.is_string()) throw ToolError(where + ": image must be a base64 string");
  try {
    return decode_png(base64_decode(v.get<std::string>()));
  } catch (const Error& e) {
    throw ToolError(where + ": " + e.what());
  }
}

}  // namespace detail

inline const std::vector<std::string>& remote_image_tools() {
  static const std::vector<std::string> kTools = {"detect_objects", "sliding_window_detection",
                                                  "segment_and_mark", "estimate_depth"};
  return kTools;
}

/// Server-side request check, shared with contract tests.
inline void validate_tool_request(const std::string& tool, const json& body, const ToolCatalog& catalog) {
  const auto& allowed = remote_image_tools();
  if (std::find(allowed.begin(), allowed.end(), tool) == allowed.end()) {
    throw ToolError("unknown tool '" + tool + "' (allowed: " + text::join(allowed, ", ") + ")");
  }
  const std::string where = tool + " request";
  Image img = detail::decode_payload_image(detail::require(body, "image", where), where);
  if (img.empty()) throw ToolError(where + ": empty image");
  const json& params = body.value("params", json::object());
  if (!params.is_object()) throw ToolError(where + ": params must be an object");
  const ToolSpec* spec = catalog.find(tool);
  for (const auto& [k, v] : params.items()) {
    const ParamSpec* ps = spec->param(k);
    if (!ps) throw ToolError(where + ": unknown parameter '" + k + "'");
    std::string err = check_param(*ps, v);
    if (!err.empty()) throw ToolError(where + ": parameter '" + k + "': " + err);
  }
  for (const auto& ps : spec->params) {
    if (ps.required && !params.contains(ps.name)) throw ToolError(where + ": missing parameter '" + ps.name + "'");
  }
}

/// Client-side response check. Any drift from the wire format is a ToolError.
inline Value parse_tool_response(const std::string& tool, const json& body, const Image& input) {
  const std::string where = tool + " response";
  if (!body.is_object()) throw ToolError(where + ": body must be an object");
  const json& mode = detail::require(body, "server_mode", where);
  if (!mode.is_string() || (mode != "stub" && mode != "real")) {
    throw ToolError(where + ": server_mode must be \"stub\" or \"real\"");
  }
  if (!detail::require(body, "model_version", where).is_string()) {
    throw ToolError(where + ": model_version must be text");
  }
  if (body.contains("tool") && body["tool"] != tool) {
    throw ToolError(where + ": answered for tool " + body["tool"].dump());
  }
  if (tool == "detect_objects" || tool == "sliding_window_detection") {
    const json& dets = detail::require(body, "detections", where);
    if (!dets.is_array()) throw ToolError(where + ": detections must be a list");
    Detections out;
    for (size_t i = 0; i < dets.size(); ++i) {
      const std::string w = where + " detection " + std::to_string(i);
      Detection d;
      d.box = detail::parse_box(detail::require(dets[i], "box", w), w);
      detail::check_box_in(d.box, input, w);
      const json& label = detail::require(dets[i], "label", w);
      const json& score = detail::require(dets[i], "score", w);
      if (!label.is_string()) throw ToolError(w + ": label must be text");
      if (!score.is_number() || score.get<double>() < 0.0 || score.get<double>() > 1.0) {
        throw ToolError(w + ": score must be a number in [0, 1]");
      }
      d.label = label.get<std::string>();
      d.score = score.get<double>();
      out.push_back(std::move(d));
    }
    return out;
  }
  if (tool == "segment_and_mark" || tool == "estimate_depth") {
    Image img = detail::decode_payload_image(detail::require(body, "image", where), where);
    if (img.width != input.width || img.height != input.height) {
      throw ToolError(where + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      ", expected " + std::to_string(input.width) + "x" + std::to_string(input.height));
    }
    if (tool == "segment_and_mark") {
      const json& regions = detail::require(body, "regions", where);
      if (!regions.is_array()) throw ToolError(where + ": regions must be a list");
      for (size_t i = 0; i < regions.size(); ++i) {
        const std::string w = where + " region " + std::to_string(i);
        if (!detail::require(regions[i], "id", w).is_number_integer()) throw ToolError(w + ": id must be an integer");
        detail::check_box_in(detail::parse_box(detail::require(regions[i], "box", w), w), input, w);
      }
    }
    return img;
  }
  throw ToolError("unknown tool '" + tool + "'");
}

/// Deterministic in-process stand-in for the tool server. Outputs depend
/// only on (tool, image content hash, params).
class OfflineToolClient : public ToolClient {
 public:
  std::string fingerprint() const override { return "offline-tools-1"; }

  json health() override {
    return json{{"status", "ok"}, {"mode", "stub"}, {"model_versions", {{"offline", "1"}}}};
  }

  Value call(const std::string& tool, const Image& image, const json& params) override {
    return parse_tool_response(tool, respond(tool, image, params), image);
  }

  /// Raw wire-format response.
  json respond(const std::string& tool, const Image& image, const json& params) const {
    const json p = params.is_null() ? json::object() : params;
    std::uint64_t h = fnv1a64(tool + "|" + p.dump());
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size()), h);
    json out{{"tool", tool}, {"server_mode", "stub"}, {"model_version", "offline-1"}};
    if (tool == "detect_objects") {
      const double threshold = p.value("threshold", 0.3);
      json dets = json::array();
      const int n = static_cast<int>(h % 4);
      for (int i = 0; i < n; ++i) {
        const std::uint64_t r = fnv1a64(std::to_string(i), h);
        const double score = 0.05 + static_cast<double>(r % 95) / 100.0;
        if (score < threshold) continue;
        dets.push_back(detection_json({random_box(image, r), p.value("query", std::string("object")), score}));
      }
      out["detections"] = dets;
    } else if (tool == "sliding_window_detection") {
      json dets = json::array();
      for (int gy = 0; gy < 3; ++gy) {
        for (int gx = 0; gx < 3; ++gx) {
          const std::uint64_t r = fnv1a64(std::to_string(gy * 3 + gx), h);
          const double score = static_cast<double>(r % 101) / 100.0;
          if (score < 0.5) continue;
          raster::Box b{gx * image.width / 3, gy * image.height / 3, (gx + 1) * image.width / 3,
                        (gy + 1) * image.height / 3};
          if (b.width() <= 0 || b.height() <= 0) continue;
          dets.push_back(detection_json({b, p.value("query", std::string("object")), score}));
        }
      }
      out["detections"] = dets;
    } else if (tool == "segment_and_mark") {
      const int g = p.value("granularity", 2);
      Image marked = image;
      json regions = json::array();
      int id = 1;
      for (int gy = 0; gy < g; ++gy) {
        for (int gx = 0; gx < g; ++gx) {
          raster::Box b{gx * image.width / g, gy * image.height / g, (gx + 1) * image.width / g,
                        (gy + 1) * image.height / g};
          if (b.width() <= 0 || b.height() <= 0) continue;
          marked = raster::draw_box(marked, b, Rgb{255, 255, 0}, 1);
          regions.push_back({{"id", id++}, {"box", box_json(b)}});
        }
      }
      out["image"] = base64_encode(encode_png(marked));
      out["regions"] = regions;
    } else if (tool == "estimate_depth") {
      // Brighter = nearer: vertical gradient averaged with luma.
      Image gray = raster::grayscale(image);
      Image depth(image.width, image.height);
      for (int y = 0; y < image.height; ++y) {
        const int grad = image.height > 1 ? y * 255 / (image.height - 1) : 0;
        for (int x = 0; x < image.width; ++x) {
          const auto v = static_cast<std::uint8_t>((grad + gray.at(x, y).r) / 2);
          depth.set(x, y, {v, v, v});
        }
      }
      out["image"] = base64_encode(encode_png(depth));
    } else {
      throw ToolError("unknown tool '" + tool + "' (allowed: " + text::join(remote_image_tools(), ", ") + ")");
    }
    return out;
  }

 private:
  static raster::Box random_box(const Image& img, std::uint64_t r) {
    const int w = std::max(1, img.width / 4 + static_cast<int>(r % static_cast<std::uint64_t>(std::max(1, img.width / 4))));
    const int h = std::max(1, img.height / 4 + static_cast<int>((r >> 16) % static_cast<std::uint64_t>(std::max(1, img.height / 4))));
    const int x0 = static_cast<int>((r >> 32) % static_cast<std::uint64_t>(std::max(1, img.width - w + 1)));
    const int y0 = static_cast<int>((r >> 44) % static_cast<std::uint64_t>(std::max(1, img.height - h + 1)));
    return {x0, y0, std::min(img.width, x0 + w), std::min(img.height, y0 + h)};
  }
};

}  // namespace vpe
