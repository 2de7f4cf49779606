// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "vpe/common.hpp"
#include "vpe/tree.hpp"

namespace vpe {

enum class ExportFormat { graph_dot, structured };

inline ExportFormat parse_export_format(const std::string& s) {
  if (s == "dot" || s == "graph-dot") return ExportFormat::graph_dot;
  if (s == "json" || s == "structured") return ExportFormat::structured;
  throw ConfigError("unknown export format '" + s + "' (expected graph-dot or structured)");
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

/// Cuts at a UTF-8 boundary.
inline std::string truncate(const std::string& s, size_t max_bytes) {
  if (s.size() <= max_bytes) return s;
  size_t n = max_bytes;
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  return s.substr(0, n) + "...";
}

}  // namespace detail

/// Graphviz digraph. One declaration per node, one edge per parent link.
/// Rejected nodes carry style=dashed and class="rejected".
inline std::string export_dot(const SearchTree& tree, size_t idea_chars = 48) {
  std::string out = "digraph idea_tree {\n  node [shape=box, fontsize=10];\n";
  for (const auto& n : tree.nodes()) {
    std::string label = "#" + std::to_string(to_int(n.id)) + " " + detail::truncate(n.idea, idea_chars) + "\n";
    label += "R=" + (n.reward ? text::fixed(*n.reward, 4) : std::string("-"));
    label += " n=" + std::to_string(n.visit_count) + " " + to_string(n.status);
    out += "  n" + std::to_string(to_int(n.id)) + " [label=\"" + detail::dot_escape(label) + "\"";
    if (n.status == NodeStatus::rejected) {
      out += ", style=dashed, class=\"rejected\"";
    } else if (n.executed()) {
      out += ", style=bold";
    }
    out += "];\n";
  }
  for (const auto& n : tree.nodes()) {
    if (n.parent_id) {
      out += "  n" + std::to_string(to_int(*n.parent_id)) + " -> n" + std::to_string(to_int(n.id)) + ";\n";
    }
  }
  out += "}\n";
  return out;
}

/// Every node field, including histories and the last priority breakdown.
inline std::string export_structured(const SearchTree& tree) {
  return json{{"root", 0}, {"nodes", tree}}.dump(2) + "\n";
}

inline SearchTree parse_structured(const std::string& s) {
  json j = json::parse(s, nullptr, false);
  if (j.is_discarded() || !j.contains("nodes")) throw SnapshotError("not a structured tree export");
  return j.at("nodes").get<SearchTree>();
}

inline std::string export_tree(const SearchTree& tree, ExportFormat f) {
  return f == ExportFormat::graph_dot ? export_dot(tree) : export_structured(tree);
}

}  // namespace vpe
