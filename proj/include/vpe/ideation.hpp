// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vpe/common.hpp"
#include "vpe/gateway.hpp"
#include "vpe/prompts.hpp"
#include "vpe/types.hpp"

namespace vpe {

struct ParsedScores {
  int feasibility = 0;
  int expectation = 0;
  int novelty = 0;
  // A score was outside 1..5 and got clamped.
  bool clamped = false;
};

namespace detail {

inline std::optional<int> score_value(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d)) return static_cast<int>(d);
    return std::nullopt;
  }
  if (v.is_string()) {
    try {
      size_t used = 0;
      int x = std::stoi(v.get<std::string>(), &used);
      if (used == text::trim(v.get<std::string>()).size()) return x;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

/// Every balanced {...} span in the text, in order of its opening brace.
inline std::vector<std::string> brace_blocks(const std::string& s) {
  std::vector<std::string> out;
  for (size_t start = s.find('{'); start != std::string::npos; start = s.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < s.size(); ++i) {
      const char c = s[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        out.push_back(s.substr(start, i - start + 1));
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Extracts the three scores from the first JSON object in the reply that
/// carries all of them. Prose around the object is ignored.
inline std::optional<ParsedScores> parse_self_evaluation(const std::string& reply) {
  for (const auto& block : detail::brace_blocks(reply)) {
    json j = json::parse(block, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    auto f = j.contains("feasibility") ? detail::score_value(j["feasibility"]) : std::nullopt;
    auto e = j.contains("expectation") ? detail::score_value(j["expectation"]) : std::nullopt;
    auto n = j.contains("novelty") ? detail::score_value(j["novelty"]) : std::nullopt;
    if (!f || !e || !n) continue;
    ParsedScores s;
    auto clamp = [&](int v) {
      int c = std::clamp(v, 1, 5);
      s.clamped = s.clamped || c != v;
      return c;
    };
    s.feasibility = clamp(*f);
    s.expectation = clamp(*e);
    s.novelty = clamp(*n);
    return s;
  }
  return std::nullopt;
}

/// One generated idea with its self-assessment.
struct IdeaAttempt {
  std::string idea;
  SelfEvaluation eval;
  // Simulator coordinate; empty for real runs.
  std::vector<double> latent;
  // Ledger entries of the calls that produced this attempt.
  LedgerBuffer calls;
};

/// Ideation agent: idea generation and self-evaluation through the gateway.
class Ideator {
 public:
  Ideator(Gateway& gateway, std::string functions_reference)
      : gateway_(gateway), functions_reference_(std::move(functions_reference)) {}

  /// Asks for a new idea; an empty reply is re-asked once.
  std::string generate_idea(IdeationContext ctx, LedgerBuffer* buffer = nullptr) {
    if (text::trim(ctx.problem_description).empty()) throw IdeationError("problem description is empty");
    ctx.tool_catalog_reference = functions_reference_;
    const std::string prompt = render_idea_generation(ctx);
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string idea = text::trim(call(Role::ideation, prompt, buffer).text);
      if (!idea.empty()) return idea;
      spdlog::warn("ideation returned an empty idea (attempt {})", attempt + 1);
    }
    throw IdeationError("ideation returned no idea text twice");
  }

  /// Scores an idea; an unparseable reply is re-asked once.
  SelfEvaluation self_evaluate(const std::string& idea, const std::vector<std::string>& siblings,
                               LedgerBuffer* buffer = nullptr) {
    if (text::trim(idea).empty()) throw IdeationError("cannot evaluate an empty idea");
    const std::string prompt = render_self_evaluation(idea, siblings, functions_reference_);
    for (int attempt = 0; attempt < 2; ++attempt) {
      const std::string reply = call(Role::ideation, prompt, buffer).text;
      if (auto s = parse_self_evaluation(reply)) {
        if (s->clamped) spdlog::warn("self-evaluation scores outside 1..5 were clamped: {}", reply);
        return SelfEvaluation::from_raw(s->feasibility, s->expectation, s->novelty);
      }
      spdlog::warn("unparseable self-evaluation reply (attempt {})", attempt + 1);
    }
    throw IdeationError("self-evaluation reply could not be parsed twice");
  }

  IdeaAttempt propose(const IdeationContext& ctx) {
    IdeaAttempt a;
    a.idea = generate_idea(ctx, &a.calls);
    a.eval = self_evaluate(a.idea, ctx.sibling_ideas, &a.calls);
    return a;
  }

  const std::string& functions_reference() const { return functions_reference_; }

 private:
  ChatReply call(Role role, const std::string& prompt, LedgerBuffer* buffer) {
    try {
      return gateway_.complete(ChatRequest::make(role, prompt), buffer);
    } catch (const GatewayError& e) {
      throw IdeationError(std::string("ideation call failed: ") + e.what());
    }
  }

  Gateway& gateway_;
  std::string functions_reference_;
};

struct GateOutcome {
  std::vector<IdeaAttempt> attempts;
  // Attempt that becomes the live node; all others are rejected.
  size_t kept = 0;
  // No attempt reached the threshold.
  bool warning = false;
};

/// Feasibility gate. Draws attempts until one reaches the threshold or the
/// attempt budget (which includes the first attempt) is spent; in the latter
/// case the most feasible attempt is kept, earliest on ties.
inline GateOutcome gate_and_regenerate(const std::function<IdeaAttempt(int)>& propose,
                                       const ExplorationConfig& cfg) {
  GateOutcome out;
  for (int i = 0; i < cfg.max_regeneration_attempts; ++i) {
    out.attempts.push_back(propose(i));
    if (out.attempts.back().eval.feasibility_raw >= cfg.feasibility_threshold) {
      out.kept = out.attempts.size() - 1;
      return out;
    }
  }
  out.warning = true;
  out.kept = 0;
  for (size_t i = 1; i < out.attempts.size(); ++i) {
    if (out.attempts[i].eval.feasibility_raw > out.attempts[out.kept].eval.feasibility_raw) out.kept = i;
  }
  return out;
}

}  // namespace vpe
