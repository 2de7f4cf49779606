// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vpe/common.hpp"
#include "vpe/tree.hpp"
#include "vpe/types.hpp"

namespace vpe {

/// Executed node: improvement of the best reward in its subtree over the
/// parent's own reward, plus a UCB exploration bonus.
inline PriorityScore priority_executed(double r_max, double r_parent, std::uint64_t n_parent,
                                       std::uint64_t n_node, double lambda_expl) {
  if (n_node == 0) {
    throw WrongBranchError("priority_executed needs n_node >= 1; unexecuted nodes use priority_unexecuted");
  }
  if (n_parent < n_node) {
    throw Error("priority_executed needs n_parent >= n_node (got " + std::to_string(n_parent) + " < " +
                std::to_string(n_node) + ")");
  }
  PriorityScore p;
  p.branch = PriorityScore::Branch::executed_formula;
  const double exploit = r_max - r_parent;
  const double explore =
      lambda_expl * std::sqrt(std::log(static_cast<double>(n_parent)) / static_cast<double>(n_node));
  p.components = {{"exploit", exploit}, {"explore", explore}};
  p.value = exploit + explore;
  return p;
}

/// Unexecuted node: self-evaluated gain and novelty plus a saturation bonus
/// that shrinks as the parent's children get executed. Both logarithm and
/// divisor carry +1 so the term is finite for a fresh parent.
inline PriorityScore priority_unexecuted(double s_gain, double s_novel, std::uint64_t n_parent,
                                         std::uint64_t c_exec_parent, double lambda_novel,
                                         double lambda_sat) {
  if (!(s_gain >= 0.0 && s_gain <= 1.0) || !(s_novel >= 0.0 && s_novel <= 1.0)) {
    throw NormalizationError("self-evaluation scores must lie in [0, 1] (s_gain=" + std::to_string(s_gain) +
                             ", s_novel=" + std::to_string(s_novel) + ")");
  }
  if (n_parent < 1) throw Error("priority_unexecuted needs an executed parent (n_parent >= 1)");
  PriorityScore p;
  p.branch = PriorityScore::Branch::unexecuted_formula;
  const double gain = s_gain;
  const double novelty = lambda_novel * s_novel;
  const double saturation = lambda_sat * std::sqrt(std::log(static_cast<double>(n_parent) + 1.0) /
                                                   (static_cast<double>(c_exec_parent) + 1.0));
  p.components = {{"gain", gain}, {"novelty", novelty}, {"saturation", saturation}};
  p.value = gain + novelty + saturation;
  return p;
}

/// Scores `child` as seen from its parent, with the formula matching its status.
inline PriorityScore score_child(const SearchTree& tree, const IdeaNode& child, const ExplorationConfig& cfg) {
  const IdeaNode& parent = tree.at(*child.parent_id);
  if (child.executed()) {
    return priority_executed(*child.max_subtree_reward, *parent.reward, parent.visit_count, child.visit_count,
                             cfg.lambda_expl);
  }
  return priority_unexecuted(child.self_eval.s_gain, child.self_eval.s_novel, parent.visit_count,
                             parent.executed_child_count, cfg.lambda_novel, cfg.lambda_sat);
}

struct SelectionResult {
  NodeId selected{};
  // Root-to-selected path, inclusive.
  std::vector<NodeId> path;
  // Every child scored during the descent, in scoring order.
  std::vector<std::pair<NodeId, PriorityScore>> scored;
};

/// Marks nodes whose subtree still holds a selectable node. Children always
/// have larger ids than their parent, so one reverse sweep suffices.
inline std::vector<bool> subtree_has_frontier(const SearchTree& tree) {
  std::vector<bool> has(tree.size(), false);
  for (size_t i = tree.size(); i-- > 0;) {
    const IdeaNode& n = tree.nodes()[i];
    if (n.selectable()) has[i] = true;
    if (has[i] && n.parent_id) has[to_int(*n.parent_id)] = true;
  }
  return has;
}

/// Root-to-leaf descent: at each executed node score its live children, move
/// to the argmax (lowest id on ties), and stop at the first unexecuted argmax.
/// Executed children whose subtrees hold no selectable node are skipped.
inline SelectionResult select_node(const SearchTree& tree, const ExplorationConfig& cfg) {
  if (tree.empty()) throw ExhaustedFrontierError("tree is empty");
  const auto has_frontier = subtree_has_frontier(tree);
  if (!has_frontier[0]) throw ExhaustedFrontierError("no unexecuted nodes remain");

  SelectionResult result;
  NodeId cur = tree.root().id;
  result.path.push_back(cur);
  while (true) {
    const IdeaNode& node = tree.at(cur);
    std::optional<NodeId> best;
    double best_value = 0.0;
    for (NodeId c : node.children) {
      const IdeaNode& child = tree.at(c);
      if (child.status == NodeStatus::rejected || !has_frontier[to_int(c)]) continue;
      PriorityScore s = score_child(tree, child, cfg);
      if (!best || s.value > best_value) {
        best = c;
        best_value = s.value;
      }
      result.scored.emplace_back(c, std::move(s));
    }
    if (!best) throw ExhaustedFrontierError("descent reached node " + std::to_string(to_int(cur)) +
                                            " without selectable children");
    result.path.push_back(*best);
    if (!tree.at(*best).executed()) {
      result.selected = *best;
      return result;
    }
    cur = *best;
  }
}

/// Baseline: highest self-evaluated gain anywhere on the frontier.
inline NodeId select_greedy_frontier(const SearchTree& tree) {
  std::optional<NodeId> best;
  for (NodeId id : tree.frontier()) {
    if (!best || tree.at(id).self_eval.s_gain > tree.at(*best).self_eval.s_gain) best = id;
  }
  if (!best) throw ExhaustedFrontierError("no unexecuted nodes remain");
  return *best;
}

/// Baseline: uniform draw from the frontier.
inline NodeId select_random_frontier(const SearchTree& tree, std::mt19937_64& rng) {
  auto f = tree.frontier();
  if (f.empty()) throw ExhaustedFrontierError("no unexecuted nodes remain");
  std::uniform_int_distribution<size_t> pick(0, f.size() - 1);
  return f[pick(rng)];
}

}  // namespace vpe
