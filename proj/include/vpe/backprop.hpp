// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <spdlog/spdlog.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vpe/dataset.hpp"
#include "vpe/gateway.hpp"
#include "vpe/image.hpp"
#include "vpe/prompts.hpp"
#include "vpe/record.hpp"
#include "vpe/tree.hpp"

namespace vpe {

inline constexpr size_t kMaxFreshImplications = 4;
inline constexpr size_t kMaxRevisedImplications = 5;

struct InsightBundle {
  std::optional<std::string> summary;
  std::vector<std::string> implications;
  // Parsing failed twice; the raw reply is the only implication.
  bool degraded = false;
};

namespace detail {

/// Strips a list marker ("- ", "* ", "1. ", "2) ") from a line, if present.
inline std::optional<std::string> bullet_text(const std::string& line) {
  std::string t = text::trim(line);
  if (t.empty()) return std::nullopt;
  if (t[0] == '-' || t[0] == '*') return text::trim(t.substr(1));
  if (text::starts_with(t, "•")) return text::trim(t.substr(3));
  size_t i = 0;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) return text::trim(t.substr(i + 1));
  return std::nullopt;
}

inline std::vector<std::string> bullets_in(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& line : text::split_lines(s)) {
    if (auto b = bullet_text(line); b && !b->empty()) out.push_back(*b);
  }
  return out;
}

}  // namespace detail

/// Splits an analysis reply into its IMPLICATIONS and CAUSES sections. A
/// missing header sets parse_warning and keeps the raw text.
inline SampleAnalysis parse_sample_analysis(const std::string& sample_id, const std::string& reply) {
  SampleAnalysis a;
  a.sample_id = sample_id;
  const size_t imp = reply.find("IMPLICATIONS:");
  const size_t cau = reply.find("CAUSES:");
  if (imp == std::string::npos || cau == std::string::npos) {
    a.parse_warning = true;
    a.implication = text::trim(reply);
    return a;
  }
  if (imp < cau) {
    a.implication = text::trim(reply.substr(imp + 13, cau - imp - 13));
    a.causes = text::trim(reply.substr(cau + 7));
  } else {
    a.causes = text::trim(reply.substr(cau + 7, imp - cau - 7));
    a.implication = text::trim(reply.substr(imp + 13));
  }
  return a;
}

/// Reads SUMMARY / IMPLICATIONS; nullopt unless both are present and the
/// implications hold at least one bullet. Keeps the first four bullets.
inline std::optional<InsightBundle> parse_insights(const std::string& reply) {
  const size_t s = reply.find("SUMMARY:");
  const size_t i = reply.find("IMPLICATIONS:");
  if (s == std::string::npos || i == std::string::npos || i < s) return std::nullopt;
  InsightBundle b;
  b.summary = text::trim(reply.substr(s + 8, i - s - 8));
  b.implications = detail::bullets_in(reply.substr(i + 13));
  if (b.summary->empty() || b.implications.empty()) return std::nullopt;
  if (b.implications.size() > kMaxFreshImplications) {
    spdlog::info("insights reply had {} implications; keeping {}", b.implications.size(), kMaxFreshImplications);
    b.implications.resize(kMaxFreshImplications);
  }
  return b;
}

/// Bullets of a revision reply, at most five; nullopt when there are none.
inline std::optional<std::vector<std::string>> parse_revision(const std::string& reply) {
  auto b = detail::bullets_in(reply);
  if (b.empty()) return std::nullopt;
  if (b.size() > kMaxRevisedImplications) {
    spdlog::info("revision reply had {} bullets; keeping {}", b.size(), kMaxRevisedImplications);
    b.resize(kMaxRevisedImplications);
  }
  return b;
}

/// Samples the analyst looks at: the two representatives and every errored
/// sample, in sample order.
inline std::vector<std::string> analysis_scope(const ExperimentRecord& r) {
  std::vector<std::string> out;
  for (const auto& s : r.sample_results) {
    if (s.sample_id == r.representative_success || s.sample_id == r.representative_failure || s.error) {
      out.push_back(s.sample_id);
    }
  }
  return out;
}

/// The analyst stage: per-sample analysis, insight distillation, and
/// revision of ancestor histories.
class Analyst {
 public:
  explicit Analyst(Gateway& gateway, std::filesystem::path artifact_root = {})
      : gateway_(gateway), root_(std::move(artifact_root)) {}

  SampleAnalysis analyze_sample(const std::string& idea, const SampleResult& result, const Sample& sample,
                                const std::string& last_png, std::optional<NodeId> node,
                                LedgerBuffer* buffer = nullptr) {
    const std::string prompt = render_sample_analysis(idea, result.prediction, sample.answer, result.error);
    std::vector<std::string> images;
    if (sample.image_bytes) images.push_back(encode_png(decode_image(*sample.image_bytes)));
    if (!last_png.empty()) images.push_back(last_png);
    ChatRequest req = ChatRequest::make(Role::analyst, prompt, std::move(images));
    req.node = node;
    try {
      const std::string reply = gateway_.complete(req, buffer).text;
      log(node, "analysis_" + sample.id, prompt, reply);
      SampleAnalysis a = parse_sample_analysis(sample.id, reply);
      if (a.parse_warning) spdlog::warn("analysis reply for sample {} lacks IMPLICATIONS/CAUSES headers", sample.id);
      return a;
    } catch (const GatewayError& e) {
      spdlog::warn("sample analysis for {} failed: {}", sample.id, e.what());
      return {sample.id, std::string("analysis unavailable: ") + e.what(), "", true};
    }
  }

  InsightBundle distill_insights(const ExperimentRecord& record, const std::string& idea,
                                 const std::vector<SampleAnalysis>& analyses, const std::vector<Sample>& samples,
                                 std::optional<NodeId> node, LedgerBuffer* buffer = nullptr) {
    InsightsContext ctx;
    ctx.total = record.sample_results.size();
    ctx.correct = record.correct_count();
    ctx.idea = idea;
    ctx.success = true;
    for (const auto& s : record.sample_results) {
      if (s.error) {
        ctx.success = false;
        if (!ctx.error) ctx.error = "sample " + s.sample_id + ": " + *s.error;
      }
    }
    for (const auto& a : analyses) {
      const SampleResult* r = nullptr;
      for (const auto& s : record.sample_results) {
        if (s.sample_id == a.sample_id) r = &s;
      }
      std::string truth;
      for (const auto& s : samples) {
        if (s.id == a.sample_id) truth = s.answer;
      }
      ctx.comparisons.push_back({a.sample_id, r ? r->prediction : "", truth, r && r->correct, a.implication,
                                 a.causes.empty() ? "None" : a.causes});
    }
    const std::string prompt = render_insights(ctx);
    ChatRequest req = ChatRequest::make(Role::analyst, prompt);
    req.node = node;
    std::string last_reply;
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        last_reply = gateway_.complete(req, buffer).text;
      } catch (const GatewayError& e) {
        last_reply = std::string("insight distillation failed: ") + e.what();
        spdlog::warn("{}", last_reply);
        break;
      }
      log(node, "insights_" + std::to_string(attempt), prompt, last_reply);
      if (auto b = parse_insights(last_reply)) return *b;
      spdlog::warn("unparseable insights reply (attempt {})", attempt + 1);
    }
    InsightBundle degraded;
    degraded.degraded = true;
    degraded.implications = {text::trim(last_reply).empty() ? "(empty insights reply)" : text::trim(last_reply)};
    return degraded;
  }

  /// Revises each ancestor from the parent up to the root. Returns the number
  /// of revision calls made.
  size_t backpropagate_insights(SearchTree& tree, NodeId node, LedgerBuffer* buffer = nullptr) {
    size_t calls = 0;
    for (auto cur = tree.at(node).parent_id; cur; cur = tree.at(*cur).parent_id) {
      const IdeaNode& anc = tree.at(*cur);
      std::vector<std::string> children;
      for (NodeId c : anc.children) {
        const IdeaNode& child = tree.at(c);
        if (!child.executed()) continue;
        children.insert(children.end(), child.history.implications.begin(), child.history.implications.end());
      }
      const std::string prompt = render_revision(anc.history.implications, children);
      ChatRequest req = ChatRequest::make(Role::analyst, prompt);
      req.node = node;
      ++calls;
      try {
        const std::string reply = gateway_.complete(req, buffer).text;
        log(node, "revision_" + std::to_string(to_int(*cur)), prompt, reply);
        if (auto revised = parse_revision(reply)) {
          tree.mutable_node(*cur).history.implications = std::move(*revised);
        } else {
          spdlog::warn("revision reply for node {} has no bullets; keeping prior implications", to_int(*cur));
        }
      } catch (const GatewayError& e) {
        spdlog::warn("revision of node {} failed: {}; keeping prior implications", to_int(*cur), e.what());
      }
    }
    return calls;
  }

  /// Full analyst stage for a freshly executed node.
  void reflect(SearchTree& tree, NodeId node, const std::vector<Sample>& samples,
               const std::function<std::string(const std::string&)>& last_png, LedgerBuffer* buffer = nullptr) {
    const IdeaNode& n = tree.at(node);
    if (!n.executed() || !n.record) throw LifecycleError("cannot analyze an unexecuted node");
    const ExperimentRecord record = *n.record;
    const std::string idea = n.idea;
    std::vector<SampleAnalysis> analyses;
    for (const auto& id : analysis_scope(record)) {
      const SampleResult* r = nullptr;
      for (const auto& s : record.sample_results) {
        if (s.sample_id == id) r = &s;
      }
      for (const auto& s : samples) {
        if (s.id == id) analyses.push_back(analyze_sample(idea, *r, s, last_png(id), node, buffer));
      }
    }
    InsightBundle b = distill_insights(record, idea, analyses, samples, node, buffer);
    IdeaNode& m = tree.mutable_node(node);
    m.history.summary = b.summary;
    m.history.implications = b.implications;
    m.history.sample_analyses = std::move(analyses);
    backpropagate_insights(tree, node, buffer);
  }

 private:
  void log(std::optional<NodeId> node, const std::string& name, const std::string& prompt, const std::string& reply) {
    if (root_.empty()) return;
    const std::string n = node ? std::to_string(to_int(*node)) : "adhoc";
    write_file(root_ / "nodes" / n / "analyst" / (name + ".txt"), "PROMPT:\n" + prompt + "\n\nREPLY:\n" + reply + "\n");
  }

  Gateway& gateway_;
  std::filesystem::path root_;
};

}  // namespace vpe
