// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vpe/common.hpp"
#include "vpe/program.hpp"
#include "vpe/record.hpp"
#include "vpe/types.hpp"

namespace vpe {

struct SampleAnalysis {
  std::string sample_id;
  std::string implication;
  std::string causes;
  bool parse_warning = false;

  friend bool operator==(const SampleAnalysis&, const SampleAnalysis&) = default;
};

/// What the agents learned from a node's experiment, plus insights revised in
/// from its descendants.
struct ExperimentHistory {
  std::optional<std::string> summary;
  std::vector<std::string> implications;
  std::vector<SampleAnalysis> sample_analyses;

  friend bool operator==(const ExperimentHistory&, const ExperimentHistory&) = default;
};

enum class NodeStatus { unexecuted, executed, rejected };

inline std::string to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::unexecuted: return "unexecuted";
    case NodeStatus::executed: return "executed";
    case NodeStatus::rejected: return "rejected";
  }
  return "?";
}

inline NodeStatus parse_status(const std::string& s) {
  if (s == "unexecuted") return NodeStatus::unexecuted;
  if (s == "executed") return NodeStatus::executed;
  if (s == "rejected") return NodeStatus::rejected;
  throw SnapshotError("unknown node status '" + s + "'");
}

struct IdeaNode {
  NodeId id{};
  std::optional<NodeId> parent_id;
  std::string idea;
  std::optional<VisualPromptProgram> implementation;
  SelfEvaluation self_eval;
  ExperimentHistory history;
  NodeStatus status = NodeStatus::unexecuted;
  std::optional<double> reward;
  std::optional<double> max_subtree_reward;
  std::uint64_t visit_count = 0;
  std::uint64_t executed_child_count = 0;
  std::vector<NodeId> children;

  std::optional<std::string> rejection_reason;
  // Set when the feasibility gate kept an idea none of whose attempts passed.
  std::optional<std::string> warning;
  std::optional<ExperimentRecord> record;
  // Ideation, compilation and analysis spend attributed to this node.
  TokenUsage agent_usage;
  // Simulator coordinate; empty for real runs.
  std::vector<double> latent;
  std::optional<PriorityScore> last_priority;

  bool executed() const { return status == NodeStatus::executed; }
  bool selectable() const { return status == NodeStatus::unexecuted; }

  friend bool operator==(const IdeaNode&, const IdeaNode&) = default;
};

/// The dynamically growing idea tree. Nodes live in a vector indexed by id;
/// ids are handed out in creation order and never reused.
class SearchTree {
 public:
  SearchTree() = default;

  /// Root = the naive prompt, already executed.
  static SearchTree create_root(std::string idea, VisualPromptProgram program, ExperimentRecord baseline) {
    if (!(baseline.reward >= 0.0 && baseline.reward <= 1.0)) {
      throw ConfigError("baseline reward " + std::to_string(baseline.reward) + " is outside [0, 1]");
    }
    SearchTree t;
    IdeaNode root;
    root.id = node_id(0);
    root.idea = std::move(idea);
    program.source_idea_id = root.id;
    root.implementation = std::move(program);
    root.status = NodeStatus::executed;
    root.reward = baseline.reward;
    root.max_subtree_reward = baseline.reward;
    root.visit_count = 1;
    baseline.node_id = root.id;
    root.record = std::move(baseline);
    t.nodes_.push_back(std::move(root));
    return t;
  }

  bool empty() const { return nodes_.empty(); }
  size_t size() const { return nodes_.size(); }
  const std::vector<IdeaNode>& nodes() const { return nodes_; }

  const IdeaNode& root() const { return at(node_id(0)); }

  const IdeaNode& at(NodeId id) const {
    if (to_int(id) >= nodes_.size()) throw LifecycleError("unknown node " + std::to_string(to_int(id)));
    return nodes_[to_int(id)];
  }

  IdeaNode& mutable_node(NodeId id) {
    if (to_int(id) >= nodes_.size()) throw LifecycleError("unknown node " + std::to_string(to_int(id)));
    return nodes_[to_int(id)];
  }

  bool contains(NodeId id) const { return to_int(id) < nodes_.size(); }

  NodeId add_child(NodeId parent, std::string idea, SelfEvaluation self_eval) {
    const IdeaNode& p = at(parent);
    if (!p.executed()) {
      throw LifecycleError("cannot add a child to " + to_string(p.status) + " node " +
                           std::to_string(to_int(parent)));
    }
    if (text::trim(idea).empty()) throw LifecycleError("idea text must not be empty");
    IdeaNode n;
    n.id = node_id(static_cast<std::uint32_t>(nodes_.size()));
    n.parent_id = parent;
    n.idea = std::move(idea);
    n.self_eval = self_eval;
    nodes_.push_back(std::move(n));
    nodes_[to_int(parent)].children.push_back(nodes_.back().id);
    return nodes_.back().id;
  }

  /// Records the execution and updates visit counts and subtree maxima along
  /// the path to the root.
  void mark_executed(NodeId id, VisualPromptProgram program, ExperimentRecord record) {
    IdeaNode& n = mutable_node(id);
    if (n.status != NodeStatus::unexecuted) {
      throw LifecycleError("node " + std::to_string(to_int(id)) + " is already " + to_string(n.status));
    }
    if (!(record.reward >= 0.0 && record.reward <= 1.0)) {
      throw LifecycleError("reward " + std::to_string(record.reward) + " is outside [0, 1]");
    }
    const double r = record.reward;
    program.source_idea_id = id;
    record.node_id = id;
    n.implementation = std::move(program);
    n.record = std::move(record);
    n.status = NodeStatus::executed;
    n.reward = r;
    n.max_subtree_reward = r;
    n.visit_count = 1;

    std::optional<NodeId> cur = n.parent_id;
    if (cur) nodes_[to_int(*cur)].executed_child_count += 1;
    while (cur) {
      IdeaNode& a = nodes_[to_int(*cur)];
      a.visit_count += 1;
      a.max_subtree_reward = std::max(a.max_subtree_reward.value_or(r), r);
      cur = a.parent_id;
    }
  }

  void reject_node(NodeId id, std::string reason) {
    IdeaNode& n = mutable_node(id);
    if (n.status != NodeStatus::unexecuted) {
      throw LifecycleError("cannot reject " + to_string(n.status) + " node " + std::to_string(to_int(id)));
    }
    n.status = NodeStatus::rejected;
    n.rejection_reason = std::move(reason);
  }

  /// Non-rejected unexecuted nodes, in id order.
  std::vector<NodeId> frontier() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_) {
      if (n.selectable()) out.push_back(n.id);
    }
    return out;
  }

  size_t executed_count() const {
    return static_cast<size_t>(std::count_if(nodes_.begin(), nodes_.end(),
                                             [](const IdeaNode& n) { return n.executed(); }));
  }

  /// Number of edges from the root.
  size_t depth(NodeId id) const {
    size_t d = 0;
    for (auto cur = at(id).parent_id; cur; cur = at(*cur).parent_id) ++d;
    return d;
  }

  /// Unexecuted, non-rejected children of a node.
  std::vector<NodeId> open_children(NodeId id) const {
    std::vector<NodeId> out;
    for (NodeId c : at(id).children) {
      if (at(c).selectable()) out.push_back(c);
    }
    return out;
  }

  /// Non-rejected children other than `except`, in id order.
  std::vector<NodeId> live_siblings(NodeId parent, std::optional<NodeId> except = std::nullopt) const {
    std::vector<NodeId> out;
    for (NodeId c : at(parent).children) {
      if (except && c == *except) continue;
      if (at(c).status != NodeStatus::rejected) out.push_back(c);
    }
    return out;
  }

  /// Executed node with the highest reward; ties go to the lowest id.
  NodeId best_node() const {
    std::optional<NodeId> best;
    for (const auto& n : nodes_) {
      if (!n.executed()) continue;
      if (!best || *n.reward > *at(*best).reward) best = n.id;
    }
    if (!best) throw LifecycleError("tree has no executed nodes");
    return *best;
  }

  friend bool operator==(const SearchTree&, const SearchTree&) = default;

 private:
  std::vector<IdeaNode> nodes_;

  friend void from_json(const json& j, SearchTree& t);
};

inline void to_json(json& j, const SampleAnalysis& a) {
  j = json{{"sample_id", a.sample_id},
           {"implication", a.implication},
           {"causes", a.causes},
           {"parse_warning", a.parse_warning}};
}
inline void from_json(const json& j, SampleAnalysis& a) {
  a.sample_id = j.at("sample_id").get<std::string>();
  a.implication = j.at("implication").get<std::string>();
  a.causes = j.at("causes").get<std::string>();
  a.parse_warning = j.value("parse_warning", false);
}

inline void to_json(json& j, const ExperimentHistory& h) {
  j = json{{"implications", h.implications}, {"sample_analyses", h.sample_analyses}};
  j["summary"] = detail::optional_string(h.summary);
}
inline void from_json(const json& j, ExperimentHistory& h) {
  h.summary = detail::read_optional_string(j, "summary");
  h.implications = j.at("implications").get<std::vector<std::string>>();
  h.sample_analyses = j.at("sample_analyses").get<std::vector<SampleAnalysis>>();
}

inline void to_json(json& j, const IdeaNode& n) {
  auto opt_double = [](const std::optional<double>& d) { return d ? json(*d) : json(nullptr); };
  j = json{{"id", n.id},
           {"idea", n.idea},
           {"self_eval", n.self_eval},
           {"history", n.history},
           {"status", to_string(n.status)},
           {"reward", opt_double(n.reward)},
           {"max_subtree_reward", opt_double(n.max_subtree_reward)},
           {"visit_count", n.visit_count},
           {"executed_child_count", n.executed_child_count},
           {"children", n.children},
           {"agent_usage", n.agent_usage}};
  j["parent_id"] = n.parent_id ? json(to_int(*n.parent_id)) : json(nullptr);
  j["implementation"] = n.implementation ? json(*n.implementation) : json(nullptr);
  j["rejection_reason"] = detail::optional_string(n.rejection_reason);
  j["warning"] = detail::optional_string(n.warning);
  j["record"] = n.record ? json(*n.record) : json(nullptr);
  j["last_priority"] = n.last_priority ? json(*n.last_priority) : json(nullptr);
  if (!n.latent.empty()) j["latent"] = n.latent;
}

inline void from_json(const json& j, IdeaNode& n) {
  auto opt_double = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  n.id = j.at("id").get<NodeId>();
  n.parent_id.reset();
  if (j.contains("parent_id") && !j.at("parent_id").is_null()) n.parent_id = j.at("parent_id").get<NodeId>();
  n.idea = j.at("idea").get<std::string>();
  n.implementation.reset();
  if (j.contains("implementation") && !j.at("implementation").is_null()) {
    n.implementation = j.at("implementation").get<VisualPromptProgram>();
  }
  n.self_eval = j.at("self_eval").get<SelfEvaluation>();
  n.history = j.at("history").get<ExperimentHistory>();
  n.status = parse_status(j.at("status").get<std::string>());
  n.reward = opt_double("reward");
  n.max_subtree_reward = opt_double("max_subtree_reward");
  n.visit_count = j.at("visit_count").get<std::uint64_t>();
  n.executed_child_count = j.at("executed_child_count").get<std::uint64_t>();
  n.children = j.at("children").get<std::vector<NodeId>>();
  n.rejection_reason = detail::read_optional_string(j, "rejection_reason");
  n.warning = detail::read_optional_string(j, "warning");
  n.record.reset();
  if (j.contains("record") && !j.at("record").is_null()) n.record = j.at("record").get<ExperimentRecord>();
  n.agent_usage = j.value("agent_usage", TokenUsage{});
  n.latent = j.value("latent", std::vector<double>{});
  n.last_priority.reset();
  if (j.contains("last_priority") && !j.at("last_priority").is_null()) {
    n.last_priority = j.at("last_priority").get<PriorityScore>();
  }
}

inline void to_json(json& j, const SearchTree& t) { j = t.nodes(); }

inline void from_json(const json& j, SearchTree& t) {
  t.nodes_ = j.get<std::vector<IdeaNode>>();
  for (size_t i = 0; i < t.nodes_.size(); ++i) {
    if (to_int(t.nodes_[i].id) != i) throw SnapshotError("node ids must be dense and ordered");
  }
}

}  // namespace vpe
