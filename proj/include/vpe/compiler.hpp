// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <spdlog/spdlog.h>

#include <string>
#include <vector>

#include "vpe/catalog.hpp"
#include "vpe/gateway.hpp"
#include "vpe/ideation.hpp"
#include "vpe/program.hpp"
#include "vpe/prompts.hpp"
#include "vpe/tree.hpp"

namespace vpe {

struct ParsedProgram {
  std::optional<VisualPromptProgram> program;
  // Raw JSON text that was parsed (for the repair prompt).
  std::string source;
  std::vector<std::string> errors;
};

/// Reads the first JSON object in the reply that looks like a program.
inline ParsedProgram parse_program_reply(const std::string& reply) {
  ParsedProgram out;
  for (const auto& block : detail::brace_blocks(reply)) {
    json j = json::parse(block, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (!j.contains("final_image_refs") && !j.contains("steps") && !j.contains("answer_prompt_template")) continue;
    out.source = block;
    try {
      out.program = j.get<VisualPromptProgram>();
    } catch (const std::exception& e) {
      out.errors.push_back(std::string("malformed program document: ") + e.what());
    }
    return out;
  }
  out.source = reply;
  out.errors.push_back("reply contains no JSON program object");
  return out;
}

/// The engineer stage: idea in, validated program out.
class Compiler {
 public:
  Compiler(Gateway& gateway, const ToolCatalog& catalog) : gateway_(gateway), catalog_(catalog) {}

  /// Compiles with at most one repair round. Throws CompileError on failure.
  VisualPromptProgram compile_idea(const std::string& problem_description, const std::string& idea,
                                   const ExperimentHistory& history, LedgerBuffer* buffer = nullptr,
                                   std::optional<NodeId> node = std::nullopt) {
    EngineerContext ctx{problem_description, idea, history.implications, catalog_.reference()};
    std::string prompt = render_engineer(ctx);
    std::vector<std::string> errors;
    for (int round = 0; round < 2; ++round) {
      ChatRequest req = ChatRequest::make(Role::engineer, prompt);
      req.node = node;
      ChatReply reply;
      try {
        reply = gateway_.complete(req, buffer);
      } catch (const GatewayError& e) {
        throw CompileError(std::string("engineer call failed: ") + e.what());
      }
      ParsedProgram parsed = parse_program_reply(reply.text);
      errors = parsed.errors;
      if (parsed.program) {
        for (const auto& issue : validate_program(*parsed.program, catalog_)) errors.push_back(issue.str());
        if (errors.empty()) return *parsed.program;
      }
      spdlog::info("engineer output failed validation (round {}): {}", round + 1, text::join(errors, "; "));
      prompt = render_engineer_repair(ctx, parsed.source, errors);
    }
    throw CompileError("program failed validation after repair: " + text::join(errors, "; "));
  }

 private:
  Gateway& gateway_;
  const ToolCatalog& catalog_;
};

}  // namespace vpe
