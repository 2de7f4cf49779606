// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpe/common.hpp"
#include "vpe/prompt_templates.hpp"

// Agent prompt rendering. Templates use Python str.format syntax: {name} is a
// placeholder, {{ and }} are literal braces. Substitution is single pass, so
// braces inside values are never re-expanded.
//
// Value formatting rules (shared by every template):
//   lists              "- item" lines joined by newlines; "(none)" when empty
//   missing error      "None"
//   booleans           "True" / "False"
//   reward             "0.9000 (27/30 correct)"

namespace vpe {

using PromptValues = std::map<std::string, std::string>;

inline std::string render_template(std::string_view tmpl, const PromptValues& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  for (size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '{') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
        out += '{';
        ++i;
        continue;
      }
      const size_t end = tmpl.find('}', i);
      if (end == std::string_view::npos) throw Error("unterminated placeholder in template");
      const std::string name(tmpl.substr(i + 1, end - i - 1));
      auto it = values.find(name);
      if (it == values.end()) throw Error("no value for template placeholder {" + name + "}");
      out += it->second;
      i = end;
    } else if (c == '}') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') ++i;
      else throw Error("single '}' in template");
      out += '}';
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string bool_text(bool b) { return b ? "True" : "False"; }

inline std::string reward_text(size_t correct, size_t total) {
  const double r = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  return text::fixed(r, 4) + " (" + std::to_string(correct) + "/" + std::to_string(total) + " correct)";
}

struct IdeationContext {
  std::string problem_description;
  std::string parent_idea;
  std::vector<std::string> sibling_ideas;
  std::vector<std::string> parent_implications;
  std::string tool_catalog_reference;
};

inline std::string render_idea_generation(const IdeationContext& c) {
  return render_template(templates::idea_generation,
                         {{"problem_description", c.problem_description},
                          {"parent_idea", c.parent_idea},
                          {"sibling_ideas", "Sibling ideas:\n" + text::bullets(c.sibling_ideas)},
                          {"parent_implications", text::bullets(c.parent_implications)},
                          {"functions_reference", c.tool_catalog_reference}});
}

inline std::string render_self_evaluation(const std::string& idea, const std::vector<std::string>& siblings,
                                          const std::string& functions_reference) {
  return render_template(templates::self_evaluation, {{"idea", idea},
                                                      {"sibling_ideas", text::bullets(siblings)},
                                                      {"functions_reference", functions_reference}});
}

inline std::string render_sample_analysis(const std::string& idea, const std::string& prediction,
                                          const std::string& ground_truth, const std::optional<std::string>& error) {
  return render_template(templates::sample_analysis, {{"idea", idea},
                                                      {"prediction", prediction},
                                                      {"ground_truth", ground_truth},
                                                      {"error", error.value_or("None")}});
}

/// One analyzed sample as listed in the insights prompt.
struct ImageComparison {
  std::string sample_id;
  std::string prediction;
  std::string ground_truth;
  bool correct = false;
  std::string implication;
  std::string causes;
};

inline std::string format_image_comparisons(const std::vector<ImageComparison>& items) {
  if (items.empty()) return "(none)";
  std::vector<std::string> blocks;
  for (const auto& c : items) {
    blocks.push_back("- Sample " + c.sample_id + " (prediction: " + c.prediction + "; ground truth: " +
                     c.ground_truth + "; correct: " + bool_text(c.correct) + ")\n  Implications: " +
                     c.implication + "\n  Causes: " + c.causes);
  }
  return text::join(blocks, "\n");
}

struct InsightsContext {
  bool success = false;
  size_t correct = 0;
  size_t total = 0;
  std::optional<std::string> error;
  std::string idea;
  std::vector<ImageComparison> comparisons;
};

inline std::string render_insights(const InsightsContext& c) {
  return render_template(templates::insights, {{"success", bool_text(c.success)},
                                               {"reward_str", reward_text(c.correct, c.total)},
                                               {"error", c.error.value_or("None")},
                                               {"idea", c.idea},
                                               {"image_comparisons", format_image_comparisons(c.comparisons)}});
}

inline std::string render_revision(const std::vector<std::string>& current,
                                   const std::vector<std::string>& children) {
  return render_template(templates::revision, {{"current_implication", text::bullets(current)},
                                               {"children_implications", text::bullets(children)}});
}

/// Engineer prompt. The published implementation prompt asks for free-form
/// code; this one asks for the pipeline document instead.
inline constexpr std::string_view kEngineerTemplate = R"vpe(You are a machine learning engineer. Your task is to implement an idea as a visual prompt: an image-processing pipeline applied to each input image, plus the text prompt sent to the vision-language model together with the final image(s).

Problem Description:
{problem_description}

Idea to Implement:
{idea}

Implications from Previous Experiments:
{implications}

Available Functions (signatures + summaries):
{functions_reference}

Write the pipeline as a single JSON object with these fields:
- "steps": list of steps, each {{"op": <function name>, "params": {{...}}, "inputs": [<names>], "output": <new name>}}
- "final_image_refs": names of the images sent to the model, in order ("input_image" is the original image)
- "answer_prompt_template": the text prompt; it must contain {{question}} exactly once and may reference text outputs of steps as {{name}}

Rules:
- Every input must be "input_image" or the output of another step; no cycles.
- Coordinates are absolute pixels; boxes are [x0, y0, x1, y1] with x1, y1 exclusive.
- Regions detected per image flow through step outputs (pass a detections output as the second input of crop/draw_box/draw_filled_box), never through params.
- Keep the pipeline short; use only the functions listed above.

Return ONLY the JSON object.
)vpe";

inline constexpr std::string_view kEngineerRepairTemplate = R"vpe(

Your previous pipeline was rejected by the validator:
{previous}

Errors:
{errors}

Return a corrected JSON object only.
)vpe";

struct EngineerContext {
  std::string problem_description;
  std::string idea;
  std::vector<std::string> implications;
  std::string functions_reference;
};

inline std::string render_engineer(const EngineerContext& c) {
  return render_template(kEngineerTemplate, {{"problem_description", c.problem_description},
                                             {"idea", c.idea},
                                             {"implications", text::bullets(c.implications)},
                                             {"functions_reference", c.functions_reference}});
}

inline std::string render_engineer_repair(const EngineerContext& c, const std::string& previous,
                                          const std::vector<std::string>& errors) {
  return render_engineer(c) +
         render_template(kEngineerRepairTemplate, {{"previous", previous}, {"errors", text::bullets(errors)}});
}

}  // namespace vpe
