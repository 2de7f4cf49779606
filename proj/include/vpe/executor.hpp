// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "vpe/catalog.hpp"
#include "vpe/dataset.hpp"
#include "vpe/gateway.hpp"
#include "vpe/image.hpp"
#include "vpe/program.hpp"
#include "vpe/raster.hpp"
#include "vpe/record.hpp"
#include "vpe/tools.hpp"

// Artifact layout under the executor's root (when set):
//   nodes/<node>/samples/<sample>/<output>.png     every image-valued step output
//   nodes/<node>/samples/<sample>/input_image.png  when listed as a final image
//   nodes/<node>/samples/<sample>/transcript.txt   answer prompt and model reply
// SampleResult.final_images holds these paths relative to the root.

namespace vpe {

struct ExecutorOptions {
  int eval_width = 4;
  // Empty: nothing is written to disk.
  std::filesystem::path artifact_root;
};

/// Fills {question} and step-output placeholders; other braces are kept.
inline std::string fill_answer_template(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  size_t pos = 0;
  while (pos < tmpl.size()) {
    const size_t open = tmpl.find('{', pos);
    if (open == std::string::npos) break;
    const size_t close = tmpl.find('}', open + 1);
    if (close == std::string::npos) break;
    auto it = values.find(tmpl.substr(open + 1, close - open - 1));
    if (it == values.end()) {
      out += tmpl.substr(pos, open + 1 - pos);
      pos = open + 1;
      continue;
    }
    out += tmpl.substr(pos, open - pos);
    out += it->second;
    pos = close + 1;
  }
  out += tmpl.substr(pos);
  return out;
}

class Executor {
 public:
  Executor(Gateway& gateway, ToolClient& tools, const ToolCatalog& catalog, ExecutorOptions opts = {})
      : gateway_(gateway), tools_(tools), catalog_(catalog), opts_(std::move(opts)) {
    if (opts_.eval_width < 1) throw ConfigError("eval_width must be positive");
  }

  /// Per-sample call context for remote tools.
  struct CallContext {
    std::optional<NodeId> node;
    std::string sample_id;
    LedgerBuffer* buffer = nullptr;
  };

  /// Runs one step. Inputs must already be in the store.
  Value apply_tool(const ToolStep& step, const std::map<std::string, Value>& store, const CallContext& ctx) {
    const ToolSpec* spec = catalog_.find(step.op);
    if (!spec) throw ToolError("unknown tool '" + step.op + "'");
    std::vector<const Value*> in;
    for (const auto& name : step.inputs) {
      auto it = store.find(name);
      if (it == store.end()) throw ToolError("input '" + name + "' is not available");
      in.push_back(&it->second);
    }
    auto image = [&](size_t i) -> const Image& {
      if (i >= in.size() || !std::holds_alternative<Image>(*in[i])) {
        throw ToolError("input " + std::to_string(i) + " of " + step.op + " is not an image");
      }
      return std::get<Image>(*in[i]);
    };
    auto detections = [&](size_t i) -> const Detections* {
      if (i >= in.size()) return nullptr;
      if (!std::holds_alternative<Detections>(*in[i])) throw ToolError("input " + std::to_string(i) + " is not detections");
      return &std::get<Detections>(*in[i]);
    };
    const json& p = step.params;
    auto point = [&](const char* key, raster::Point def) {
      if (!p.contains(key)) return def;
      return raster::Point{p[key][0].get<int>(), p[key][1].get<int>()};
    };
    auto color = [&]() {
      if (!p.contains("color")) return Rgb{255, 0, 0};
      return *parse_color(p["color"]);
    };
    auto param_box = [&]() {
      const json& b = p.at("box");
      return raster::Box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    };
    // Boxes from the box param, or every box of the detections input.
    auto region_boxes = [&]() {
      std::vector<raster::Box> boxes;
      if (p.contains("box")) {
        boxes.push_back(param_box());
      } else if (const Detections* d = detections(1)) {
        for (const auto& det : *d) boxes.push_back(det.box);
      }
      return boxes;
    };

    const std::string& op = step.op;
    if (op == "get_image_size") {
      const Image& img = image(0);
      return ImageSize{img.width, img.height};
    }
    if (op == "convert_image_grayscale") return raster::grayscale(image(0));
    if (op == "crop") {
      raster::Box box;
      if (p.contains("box")) {
        box = param_box();
      } else {
        const Detections* d = detections(1);
        if (!d) throw ToolError("crop needs a box parameter or a detections input");
        const size_t idx = p.value("index", 0);
        if (d->empty()) throw ToolError("detection input '" + step.inputs[1] + "' is empty; no box to crop");
        if (idx >= d->size()) {
          throw ToolError("detection index " + std::to_string(idx) + " out of range (" + std::to_string(d->size()) +
                          " detections)");
        }
        box = (*d)[idx].box;
        const int pad = p.value("padding", 0);
        box = {box.x0 - pad, box.y0 - pad, box.x1 + pad, box.y1 + pad};
      }
      return raster::crop(image(0), box);
    }
    if (op == "overlay_images") {
      return raster::overlay(image(0), image(1), point("position", {0, 0}), p.value("opacity", 0.5));
    }
    if (op == "draw_line") {
      return raster::draw_line(image(0), point("from", {}), point("to", {}), color(), p.value("width", 1));
    }
    if (op == "draw_box") {
      Image out = image(0);
      for (const auto& b : region_boxes()) out = raster::draw_box(out, b, color(), p.value("width", 1));
      return out;
    }
    if (op == "draw_filled_box") {
      Image out = image(0);
      for (const auto& b : region_boxes()) out = raster::draw_filled_box(out, b, color());
      return out;
    }
    if (op == "ask_to_LVLM") {
      std::vector<std::string> pngs;
      for (size_t i = 0; i < in.size(); ++i) pngs.push_back(encode_png(image(i)));
      ChatRequest req = ChatRequest::make(Role::target_model, p.at("prompt").get<std::string>(), std::move(pngs));
      req.node = ctx.node;
      req.sample_id = ctx.sample_id;
      try {
        return text::trim(gateway_.complete(req, ctx.buffer).text);
      } catch (const GatewayError& e) {
        throw ToolError(std::string("ask_to_LVLM: ") + e.what());
      }
    }
    if (spec->remote) return tools_.call(op, image(0), p);
    throw ToolError("tool '" + op + "' has no implementation");
  }

  /// Runs the pipeline and queries the target model. Never throws for
  /// sample-level failures; they land in SampleResult.error.
  SampleResult run_program_on_sample(const VisualPromptProgram& program, const Sample& sample,
                                     std::optional<NodeId> node, LedgerBuffer& buffer) {
    SampleResult r;
    r.sample_id = sample.id;
    last_final_png_store(sample.id, "");
    std::map<std::string, Value> store;
    const std::filesystem::path dir = sample_dir(node, sample.id);
    try {
      if (!sample.image_bytes) throw ToolError("sample image is not loaded");
      store.emplace(kInputImage, decode_image(*sample.image_bytes));
    } catch (const Error& e) {
      r.error = std::string("input image: ") + e.what();
      return r;
    }

    CallContext ctx{node, sample.id, &buffer};
    for (size_t i : execution_order(program)) {
      const ToolStep& step = program.steps[i];
      try {
        Value v = apply_tool(step, store, ctx);
        if (!dir.empty() && std::holds_alternative<Image>(v)) {
          save_png(opts_.artifact_root / dir / (step.output + ".png"), std::get<Image>(v));
        }
        store.insert_or_assign(step.output, std::move(v));
      } catch (const std::exception& e) {
        r.error = detail::step_label(i, step) + ": " + e.what();
        r.tokens = buffer.total();
        return r;
      }
    }

    std::map<std::string, std::string> values{{"question", sample.question}};
    for (const auto& [name, v] : store) {
      if (!std::holds_alternative<Image>(v)) values.emplace(name, value_text(v));
    }
    const std::string prompt = fill_answer_template(program.answer_prompt_template, values);
    std::vector<std::string> pngs;
    for (const auto& ref : program.final_image_refs) {
      auto it = store.find(ref);
      if (it == store.end() || !std::holds_alternative<Image>(it->second)) {
        r.error = "final image '" + ref + "' is not an image";
        r.tokens = buffer.total();
        return r;
      }
      pngs.push_back(encode_png(std::get<Image>(it->second)));
      if (!dir.empty()) {
        if (ref == kInputImage) write_file(opts_.artifact_root / dir / "input_image.png", pngs.back());
        r.final_images.push_back((dir / (ref + ".png")).generic_string());
      } else {
        r.final_images.push_back(ref);
      }
    }
    last_final_png_store(sample.id, pngs.empty() ? std::string() : pngs.back());

    ChatRequest req = ChatRequest::make(Role::target_model, prompt, std::move(pngs));
    req.node = node;
    req.sample_id = sample.id;
    try {
      ChatReply reply = gateway_.complete(req, &buffer);
      r.prediction = text::trim(reply.text);
      r.correct = match_answer(r.prediction, sample.answer, sample.mode);
      if (!dir.empty()) {
        write_file(opts_.artifact_root / dir / "transcript.txt",
                   "PROMPT:\n" + prompt + "\n\nREPLY:\n" + reply.text + "\n");
      }
    } catch (const GatewayError& e) {
      r.error = std::string("target model: ") + e.what();
    }
    r.tokens = buffer.total();
    return r;
  }

  /// Evaluates a program on a sample set with bounded parallelism. Results
  /// and ledger entries are ordered by the sample list, whatever the thread
  /// timing.
  ExperimentRecord evaluate_on_devset(NodeId node, const VisualPromptProgram& program,
                                      const std::vector<Sample>& samples) {
    if (samples.empty()) throw DatasetError("cannot evaluate on an empty sample set");
    std::vector<SampleResult> results(samples.size());
    std::vector<LedgerBuffer> buffers(samples.size());
    std::vector<bool> hit(samples.size(), false);
    std::vector<std::string> keys(samples.size());
    {
      std::lock_guard lock(mu_);
      for (size_t i = 0; i < samples.size(); ++i) {
        keys[i] = cache_key(program, samples[i]);
        auto it = cache_.find(keys[i]);
        if (it == cache_.end()) continue;
        SampleResult r = it->second.result;
        r.sample_id = samples[i].id;
        r.correct = !r.error && match_answer(r.prediction, samples[i].answer, samples[i].mode);
        r.tokens = {};
        r.cached = true;
        results[i] = std::move(r);
        last_final_png_[samples[i].id] = it->second.last_png;
        hit[i] = true;
        ++hits_;
      }
    }

    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (size_t i = next++; i < samples.size(); i = next++) {
        if (hit[i]) continue;
        results[i] = run_program_on_sample(program, samples[i], node, buffers[i]);
      }
    };
    const size_t width = std::min<size_t>(static_cast<size_t>(opts_.eval_width), samples.size());
    if (width <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (size_t t = 0; t < width; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    {
      std::lock_guard lock(mu_);
      for (size_t i = 0; i < samples.size(); ++i) {
        if (hit[i]) continue;
        gateway_.commit(buffers[i]);
        // Failures may be transient (unreachable tool server), so only
        // clean results are reused.
        if (!results[i].error) cache_[keys[i]] = {results[i], last_final_png_[samples[i].id]};
      }
    }
    return make_record(node, std::move(results));
  }

  /// Cache key: content hash of (program, image bytes, question, clients).
  std::string cache_key(const VisualPromptProgram& program, const Sample& sample) const {
    const std::string image_hash = sample.image_bytes ? sha256_hex(*sample.image_bytes) : "none";
    return sha256_hex(canonical_form(program) + '\0' + image_hash + '\0' + sample.question + '\0' + fingerprint());
  }

  std::string fingerprint() const { return gateway_.backend().fingerprint() + "|" + tools_.fingerprint(); }

  /// Re-registers stored results (resume). Final images are read back from
  /// the artifact directory; entries whose files are gone are skipped.
  void seed_cache(const VisualPromptProgram& program, const std::vector<Sample>& samples,
                  const ExperimentRecord& record) {
    std::lock_guard lock(mu_);
    for (const auto& r : record.sample_results) {
      if (r.cached || r.error) continue;
      auto s = std::find_if(samples.begin(), samples.end(), [&](const Sample& x) { return x.id == r.sample_id; });
      if (s == samples.end()) continue;
      std::string last_png;
      if (!r.final_images.empty()) {
        if (opts_.artifact_root.empty()) continue;
        const auto path = opts_.artifact_root / r.final_images.back();
        if (!std::filesystem::exists(path)) continue;
        last_png = read_file(path);
      }
      cache_.emplace(cache_key(program, *s), CacheEntry{r, last_png});
    }
  }

  size_t cache_hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  size_t cache_size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

  /// PNG of the last image sent to the model for a sample in the most recent
  /// evaluation; empty when the sample failed before that point.
  std::string last_final_png(const std::string& sample_id) const {
    std::lock_guard lock(mu_);
    auto it = last_final_png_.find(sample_id);
    return it == last_final_png_.end() ? std::string() : it->second;
  }

  const ExecutorOptions& options() const { return opts_; }

 private:
  struct CacheEntry {
    SampleResult result;
    std::string last_png;
  };

  std::filesystem::path sample_dir(std::optional<NodeId> node, const std::string& sample_id) const {
    if (opts_.artifact_root.empty()) return {};
    const std::string n = node ? std::to_string(to_int(*node)) : "adhoc";
    return std::filesystem::path("nodes") / n / "samples" / sample_id;
  }

  void last_final_png_store(const std::string& sample_id, std::string png) {
    std::lock_guard lock(mu_);
    last_final_png_[sample_id] = std::move(png);
  }

  Gateway& gateway_;
  ToolClient& tools_;
  const ToolCatalog& catalog_;
  ExecutorOptions opts_;
  mutable std::mutex mu_;
  std::map<std::string, CacheEntry> cache_;
  std::map<std::string, std::string> last_final_png_;
  size_t hits_ = 0;
};

}  // namespace vpe
