// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vpe/common.hpp"

namespace vpe {

/// Agent self-assessment of an idea before it is executed. Raw scores are the
/// 1..5 integers returned by the evaluator; s_gain / s_novel are the
/// normalized values the selection rule reads.
struct SelfEvaluation {
  int feasibility_raw = 5;
  int expectation_raw = 1;
  int novelty_raw = 1;
  double s_gain = 0.0;
  double s_novel = 0.0;

  /// Affine map {1..5} -> {0, 0.25, 0.5, 0.75, 1}.
  static double normalize(int raw) { return static_cast<double>(raw - 1) / 4.0; }

  static SelfEvaluation from_raw(int feasibility, int expectation, int novelty) {
    SelfEvaluation e;
    e.feasibility_raw = feasibility;
    e.expectation_raw = expectation;
    e.novelty_raw = novelty;
    e.s_gain = normalize(expectation);
    e.s_novel = normalize(novelty);
    return e;
  }

  /// Continuous scores (used by the simulator). Raw fields hold the nearest
  /// integer level so that exported trees stay readable.
  static SelfEvaluation from_signal(int feasibility, double gain, double novelty) {
    SelfEvaluation e;
    e.feasibility_raw = feasibility;
    e.s_gain = gain;
    e.s_novel = novelty;
    e.expectation_raw = 1 + static_cast<int>(std::lround(gain * 4.0));
    e.novelty_raw = 1 + static_cast<int>(std::lround(novelty * 4.0));
    return e;
  }

  bool consistent() const {
    return s_gain == normalize(expectation_raw) && s_novel == normalize(novelty_raw);
  }

  friend bool operator==(const SelfEvaluation&, const SelfEvaluation&) = default;
};

inline void to_json(json& j, const SelfEvaluation& e) {
  j = json{{"feasibility_raw", e.feasibility_raw},
           {"expectation_raw", e.expectation_raw},
           {"novelty_raw", e.novelty_raw},
           {"s_gain", e.s_gain},
           {"s_novel", e.s_novel}};
}
inline void from_json(const json& j, SelfEvaluation& e) {
  e.feasibility_raw = j.at("feasibility_raw").get<int>();
  e.expectation_raw = j.at("expectation_raw").get<int>();
  e.novelty_raw = j.at("novelty_raw").get<int>();
  e.s_gain = j.at("s_gain").get<double>();
  e.s_novel = j.at("s_novel").get<double>();
}

/// A node's selection priority with its additive terms. Executed nodes use
/// {exploit, explore}; unexecuted nodes use {gain, novelty, saturation}.
struct PriorityScore {
  enum class Branch { executed_formula, unexecuted_formula };

  double value = 0.0;
  Branch branch = Branch::executed_formula;
  std::vector<std::pair<std::string, double>> components;

  friend bool operator==(const PriorityScore&, const PriorityScore&) = default;
};

inline void to_json(json& j, const PriorityScore& p) {
  j = json{{"value", p.value},
           {"branch", p.branch == PriorityScore::Branch::executed_formula ? "executed_formula"
                                                                           : "unexecuted_formula"}};
  json comps = json::object();
  for (const auto& [k, v] : p.components) comps[k] = v;
  j["components"] = comps;
}

inline void from_json(const json& j, PriorityScore& p) {
  p.value = j.at("value").get<double>();
  p.branch = j.at("branch").get<std::string>() == "executed_formula"
                 ? PriorityScore::Branch::executed_formula
                 : PriorityScore::Branch::unexecuted_formula;
  p.components.clear();
  // Component order is fixed by the branch so that round trips are exact.
  const char* const exec_terms[] = {"exploit", "explore"};
  const char* const unexec_terms[] = {"gain", "novelty", "saturation"};
  const auto& comps = j.at("components");
  if (p.branch == PriorityScore::Branch::executed_formula) {
    for (const char* t : exec_terms) {
      if (comps.contains(t)) p.components.emplace_back(t, comps.at(t).get<double>());
    }
  } else {
    for (const char* t : unexec_terms) {
      if (comps.contains(t)) p.components.emplace_back(t, comps.at(t).get<double>());
    }
  }
}

enum class SelectionPolicy { nuct, greedy_frontier, random_frontier };

inline std::string to_string(SelectionPolicy p) {
  switch (p) {
    case SelectionPolicy::nuct: return "nuct";
    case SelectionPolicy::greedy_frontier: return "greedy_frontier";
    case SelectionPolicy::random_frontier: return "random_frontier";
  }
  return "nuct";
}

inline SelectionPolicy parse_policy(const std::string& s) {
  if (s == "nuct") return SelectionPolicy::nuct;
  if (s == "greedy" || s == "greedy_frontier") return SelectionPolicy::greedy_frontier;
  if (s == "random" || s == "random_frontier") return SelectionPolicy::random_frontier;
  throw ConfigError("unknown selection policy '" + s + "' (expected nuct, greedy, random)");
}

struct ExplorationConfig {
  double lambda_expl = 0.5;
  double lambda_novel = 0.15;
  double lambda_sat = 0.5;
  int k = 3;
  int iteration_budget = 50;
  std::uint64_t seed = 0;
  int feasibility_threshold = 3;
  // Total attempts per generated idea, including the first.
  int max_regeneration_attempts = 3;
  // Select/compile retries inside one iteration before the run aborts.
  int max_selection_attempts = 10;
  // Parallel sample evaluations.
  int eval_width = 4;
  SelectionPolicy policy = SelectionPolicy::nuct;

  void validate() const {
    if (!(lambda_expl >= 0) || !(lambda_novel >= 0) || !(lambda_sat >= 0)) {
      throw ConfigError("lambda coefficients must be >= 0");
    }
    if (k < 1) throw ConfigError("k must be positive");
    if (iteration_budget < 1) throw ConfigError("iteration_budget must be positive");
    if (feasibility_threshold < 1 || feasibility_threshold > 5) {
      throw ConfigError("feasibility_threshold must be in 1..5");
    }
    if (max_regeneration_attempts < 1) throw ConfigError("max_regeneration_attempts must be positive");
    if (max_selection_attempts < 1) throw ConfigError("max_selection_attempts must be positive");
    if (eval_width < 1) throw ConfigError("eval_width must be positive");
  }

  friend bool operator==(const ExplorationConfig&, const ExplorationConfig&) = default;
};

inline void to_json(json& j, const ExplorationConfig& c) {
  j = json{{"lambda_expl", c.lambda_expl},
           {"lambda_novel", c.lambda_novel},
           {"lambda_sat", c.lambda_sat},
           {"k", c.k},
           {"iteration_budget", c.iteration_budget},
           {"seed", c.seed},
           {"feasibility_threshold", c.feasibility_threshold},
           {"max_regeneration_attempts", c.max_regeneration_attempts},
           {"max_selection_attempts", c.max_selection_attempts},
           {"eval_width", c.eval_width},
           {"policy", to_string(c.policy)}};
}

/// Missing keys keep their defaults, so partial config files are valid.
inline void from_json(const json& j, ExplorationConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("lambda_expl", c.lambda_expl);
  get("lambda_novel", c.lambda_novel);
  get("lambda_sat", c.lambda_sat);
  get("k", c.k);
  get("iteration_budget", c.iteration_budget);
  get("seed", c.seed);
  get("feasibility_threshold", c.feasibility_threshold);
  get("max_regeneration_attempts", c.max_regeneration_attempts);
  get("max_selection_attempts", c.max_selection_attempts);
  get("eval_width", c.eval_width);
  if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
}

}  // namespace vpe
