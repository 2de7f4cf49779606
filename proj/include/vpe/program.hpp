// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vpe/catalog.hpp"
#include "vpe/common.hpp"

namespace vpe {

inline constexpr const char* kInputImage = "input_image";

struct ToolStep {
  std::string op;
  json params = json::object();
  std::vector<std::string> inputs;
  std::string output;

  friend bool operator==(const ToolStep&, const ToolStep&) = default;
};

/// An image-manipulation pipeline plus the text template used to query the
/// target model. The identity program (no steps, final image = input image,
/// template "{question}") is the naive prompt.
struct VisualPromptProgram {
  std::vector<ToolStep> steps;
  std::vector<std::string> final_image_refs{kInputImage};
  std::string answer_prompt_template = "{question}";
  std::optional<NodeId> source_idea_id;

  static VisualPromptProgram identity() { return {}; }

  friend bool operator==(const VisualPromptProgram&, const VisualPromptProgram&) = default;
};

inline void to_json(json& j, const ToolStep& s) {
  j = json{{"op", s.op}, {"params", s.params}, {"inputs", s.inputs}, {"output", s.output}};
}

inline void from_json(const json& j, ToolStep& s) {
  if (!j.is_object()) throw Error("step must be an object");
  s.op = j.at("op").get<std::string>();
  s.params = j.value("params", json::object());
  if (!s.params.is_object()) throw Error("step '" + s.op + "': params must be an object");
  s.inputs = j.value("inputs", std::vector<std::string>{});
  s.output = j.at("output").get<std::string>();
}

inline void to_json(json& j, const VisualPromptProgram& p) {
  j = json{{"steps", p.steps},
           {"final_image_refs", p.final_image_refs},
           {"answer_prompt_template", p.answer_prompt_template}};
  j["source_idea_id"] = p.source_idea_id ? json(to_int(*p.source_idea_id)) : json(nullptr);
}

inline void from_json(const json& j, VisualPromptProgram& p) {
  if (!j.is_object()) throw Error("program must be a JSON object");
  p.steps = j.value("steps", std::vector<ToolStep>{});
  p.final_image_refs = j.at("final_image_refs").get<std::vector<std::string>>();
  p.answer_prompt_template = j.at("answer_prompt_template").get<std::string>();
  p.source_idea_id.reset();
  if (j.contains("source_idea_id") && !j.at("source_idea_id").is_null()) {
    p.source_idea_id = j.at("source_idea_id").get<NodeId>();
  }
}

/// Serialization without provenance; identical pipelines hash identically.
inline std::string canonical_form(const VisualPromptProgram& p) {
  json j = p;
  j.erase("source_idea_id");
  return j.dump();
}

struct ValidationIssue {
  std::string where;
  std::string code;
  std::string message;

  std::string str() const { return where + ": " + code + ": " + message; }
  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

/// Placeholder names ("{name}") in a template, in order of appearance.
inline std::vector<std::string> template_placeholders(const std::string& tmpl) {
  std::vector<std::string> names;
  size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string::npos) {
    size_t end = tmpl.find('}', pos + 1);
    if (end == std::string::npos) break;
    std::string name = tmpl.substr(pos + 1, end - pos - 1);
    bool ident = !name.empty();
    for (char c : name) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) ident = false;
    }
    if (ident) {
      names.push_back(name);
      pos = end + 1;
    } else {
      pos = pos + 1;
    }
  }
  return names;
}

namespace detail {

inline std::string step_label(size_t i, const ToolStep& s) {
  return "step " + std::to_string(i) + " (" + s.op + " -> " + s.output + ")";
}

}  // namespace detail

/// Index of the step producing each output name.
inline std::map<std::string, size_t> output_index(const VisualPromptProgram& p) {
  std::map<std::string, size_t> out;
  for (size_t i = 0; i < p.steps.size(); ++i) out.emplace(p.steps[i].output, i);
  return out;
}

/// Checks catalog membership, parameter typing, references, acyclicity,
/// final image refs and the answer template. Returns every violation found.
inline std::vector<ValidationIssue> validate_program(const VisualPromptProgram& program,
                                                     const ToolCatalog& catalog) {
  std::vector<ValidationIssue> issues;
  auto add = [&](std::string where, std::string code, std::string msg) {
    issues.push_back({std::move(where), std::move(code), std::move(msg)});
  };

  std::map<std::string, size_t> producer;
  for (size_t i = 0; i < program.steps.size(); ++i) {
    const auto& s = program.steps[i];
    const std::string where = detail::step_label(i, s);
    if (s.output.empty()) {
      add(where, "invalid_output", "output name is empty");
    } else if (s.output == kInputImage) {
      add(where, "invalid_output", "output name 'input_image' is reserved");
    } else if (!producer.emplace(s.output, i).second) {
      add(where, "duplicate_output", "output '" + s.output + "' is already produced by step " +
                                         std::to_string(producer[s.output]));
    }
  }

  auto kind_of = [&](const std::string& name) -> std::optional<ValueKind> {
    if (name == kInputImage) return ValueKind::image;
    auto it = producer.find(name);
    if (it == producer.end()) return std::nullopt;
    const ToolSpec* spec = catalog.find(program.steps[it->second].op);
    if (!spec) return std::nullopt;
    return spec->output;
  };

  for (size_t i = 0; i < program.steps.size(); ++i) {
    const auto& s = program.steps[i];
    const std::string where = detail::step_label(i, s);
    const ToolSpec* spec = catalog.find(s.op);
    if (!spec) {
      add(where, "unknown_tool", "'" + s.op + "' is not in the tool catalog");
      continue;
    }
    for (const auto& [name, value] : s.params.items()) {
      const ParamSpec* ps = spec->param(name);
      if (!ps) {
        add(where, "unknown_param", "parameter '" + name + "' is not accepted by " + s.op);
        continue;
      }
      std::string err = check_param(*ps, value);
      if (!err.empty()) {
        bool range = err.find("outside") != std::string::npos;
        add(where, range ? "param_range" : "param_type", "parameter '" + name + "': " + err);
      }
    }
    for (const auto& ps : spec->params) {
      if (ps.required && !s.params.contains(ps.name)) {
        add(where, "missing_param", "required parameter '" + ps.name + "' is missing");
      }
    }

    size_t required = 0;
    bool variadic = false;
    for (const auto& slot : spec->inputs) {
      if (!slot.optional) ++required;
      variadic = variadic || slot.variadic;
    }
    if (s.inputs.size() < required || (!variadic && s.inputs.size() > spec->inputs.size())) {
      add(where, "input_arity", s.op + " takes " + std::to_string(required) +
                                    (variadic ? "+" : "..") + std::to_string(spec->inputs.size()) +
                                    " inputs, got " + std::to_string(s.inputs.size()));
    }
    for (size_t k = 0; k < s.inputs.size(); ++k) {
      const std::string& ref = s.inputs[k];
      auto kind = kind_of(ref);
      if (!kind) {
        if (producer.count(ref) == 0) {
          add(where, "undefined_reference", "input '" + ref + "' is not produced by any step");
        }
        continue;
      }
      if (spec->inputs.empty()) continue;
      const InputSlot& slot = spec->inputs[std::min(k, spec->inputs.size() - 1)];
      if (k >= spec->inputs.size() && !slot.variadic) continue;
      if (*kind != slot.kind) {
        add(where, "input_type", "input '" + ref + "' is " + to_string(*kind) + " but slot '" +
                                     slot.name + "' expects " + to_string(slot.kind));
      }
    }

    // Tools that take a region accept it either as a literal box or from a
    // detection step, never both.
    if (spec->param("box") && spec->inputs.size() > 1 &&
        spec->inputs[1].kind == ValueKind::detections) {
      bool has_box = s.params.contains("box");
      bool has_det = s.inputs.size() > 1;
      if (has_box == has_det) {
        add(where, "region_source",
            s.op + " needs exactly one of a 'box' parameter or a detections input");
      }
    }
  }

  // Cycle detection over the dataflow graph (iterative DFS, three colors).
  {
    const size_t n = program.steps.size();
    std::vector<int> color(n, 0);
    std::vector<size_t> parent(n, n);
    auto deps = [&](size_t i) {
      std::vector<size_t> d;
      for (const auto& ref : program.steps[i].inputs) {
        auto it = producer.find(ref);
        if (it != producer.end()) d.push_back(it->second);
      }
      return d;
    };
    bool reported = false;
    for (size_t root = 0; root < n && !reported; ++root) {
      if (color[root] != 0) continue;
      std::vector<std::pair<size_t, size_t>> stack{{root, 0}};
      color[root] = 1;
      while (!stack.empty() && !reported) {
        auto& [node, next] = stack.back();
        auto d = deps(node);
        if (next < d.size()) {
          size_t m = d[next++];
          if (color[m] == 1) {
            std::vector<std::string> cyc{program.steps[m].output};
            for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
              cyc.push_back(program.steps[it->first].output);
              if (it->first == m) break;
            }
            std::reverse(cyc.begin(), cyc.end());
            add("program", "cycle", "cycle detected: " + text::join(cyc, " -> "));
            reported = true;
          } else if (color[m] == 0) {
            color[m] = 1;
            stack.push_back({m, 0});
          }
        } else {
          color[node] = 2;
          stack.pop_back();
        }
      }
    }
  }

  if (program.final_image_refs.empty()) {
    add("final_image_refs", "final_ref", "at least one final image is required");
  }
  for (const auto& ref : program.final_image_refs) {
    auto kind = kind_of(ref);
    if (!kind) {
      add("final_image_refs", "final_ref", "'" + ref + "' is not produced by any step");
    } else if (*kind != ValueKind::image) {
      add("final_image_refs", "final_ref", "'" + ref + "' is " + to_string(*kind) + ", not an image");
    }
  }

  int question_count = 0;
  for (const auto& name : template_placeholders(program.answer_prompt_template)) {
    if (name == "question") {
      ++question_count;
      continue;
    }
    auto kind = kind_of(name);
    if (!kind || *kind == ValueKind::image) {
      add("answer_prompt_template", "placeholder",
          "placeholder {" + name + "} must be {question} or a text/size/detections step output");
    }
  }
  if (question_count != 1) {
    add("answer_prompt_template", "placeholder",
        "template must contain {question} exactly once (found " + std::to_string(question_count) + ")");
  }
  return issues;
}

/// Execution order: Kahn's algorithm, lowest declaration index first.
/// Requires a program that passed validation.
inline std::vector<size_t> execution_order(const VisualPromptProgram& program) {
  const size_t n = program.steps.size();
  auto producer = output_index(program);
  std::vector<std::vector<size_t>> users(n);
  std::vector<size_t> indegree(n, 0);
  for (size_t i = 0; i < n; ++i) {
    for (const auto& ref : program.steps[i].inputs) {
      auto it = producer.find(ref);
      if (it != producer.end()) {
        users[it->second].push_back(i);
        ++indegree[i];
      }
    }
  }
  std::set<size_t> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  std::vector<size_t> order;
  while (!ready.empty()) {
    size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (size_t u : users[i]) {
      if (--indegree[u] == 0) ready.insert(u);
    }
  }
  if (order.size() != n) throw Error("program dataflow contains a cycle");
  return order;
}

}  // namespace vpe
