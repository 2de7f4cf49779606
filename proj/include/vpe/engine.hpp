// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <spdlog/spdlog.h>

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vpe/backprop.hpp"
#include "vpe/catalog.hpp"
#include "vpe/compiler.hpp"
#include "vpe/dataset.hpp"
#include "vpe/executor.hpp"
#include "vpe/gateway.hpp"
#include "vpe/ideation.hpp"
#include "vpe/landscape.hpp"
#include "vpe/nuct.hpp"
#include "vpe/tree.hpp"
#include "vpe/types.hpp"

namespace vpe {

/// What the search loop explores: a real task (agents, executor) or the
/// synthetic landscape. The explorer owns the tree and the RNG; an
/// environment only answers questions about nodes.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string root_idea() const = 0;
  virtual std::vector<double> root_latent() const { return {}; }
  virtual VisualPromptProgram root_program() const { return VisualPromptProgram::identity(); }
  virtual ExperimentRecord execute_baseline() = 0;

  /// One idea attempt under `parent`; siblings are the parent's live children.
  virtual IdeaAttempt propose(const SearchTree& tree, NodeId parent, std::mt19937_64& rng) = 0;

  /// Engineer stage. Throws CompileError to reject the node.
  virtual VisualPromptProgram compile(const SearchTree& tree, NodeId node, LedgerBuffer& calls) = 0;

  virtual ExperimentRecord run(NodeId node, const VisualPromptProgram& program) = 0;

  /// Analyst stage, including revision of ancestor histories.
  virtual void reflect(SearchTree& tree, NodeId node, LedgerBuffer& calls) = 0;

  /// Snapshot section that lets a resumed run rebuild this environment.
  virtual json describe() const = 0;
  virtual json state() const { return json::object(); }
  virtual void restore(const SearchTree&, const json&) {}

  /// Gateway whose ledger is the run's cost ledger, if any.
  virtual Gateway* gateway() { return nullptr; }
};

/// Simulator environment: no model calls, rewards from the landscape.
class LandscapeEnvironment : public Environment {
 public:
  explicit LandscapeEnvironment(LandscapeConfig cfg) : land_(std::move(cfg)) {}

  const SyntheticLandscape& landscape() const { return land_; }

  std::string root_idea() const override { return "Baseline: " + land_.idea_text(land_.nearest_index(root_latent())); }
  std::vector<double> root_latent() const override { return land_.snap(land_.config().root); }

  ExperimentRecord execute_baseline() override { return record(node_id(0), land_.simulate_reward(root_latent(), 0)); }

  IdeaAttempt propose(const SearchTree& tree, NodeId parent, std::mt19937_64& rng) override {
    std::vector<std::vector<double>> siblings;
    for (NodeId s : tree.live_siblings(parent)) siblings.push_back(tree.at(s).latent);
    LandscapeProposal p = land_.propose(tree.at(parent).latent, siblings, rng);
    IdeaAttempt a;
    a.idea = std::move(p.idea);
    a.eval = p.eval;
    a.latent = std::move(p.latent);
    return a;
  }

  VisualPromptProgram compile(const SearchTree&, NodeId, LedgerBuffer&) override {
    return VisualPromptProgram::identity();
  }

  ExperimentRecord run(NodeId node, const VisualPromptProgram&) override {
    return record(node, land_.simulate_reward(latent_of_(node), to_int(node)));
  }

  void reflect(SearchTree& tree, NodeId node, LedgerBuffer&) override {
    IdeaNode& n = tree.mutable_node(node);
    n.history.summary = "Simulated reward " + text::fixed(*n.reward, 4) + ".";
    const double parent = *tree.at(*n.parent_id).reward;
    n.history.implications = {*n.reward >= parent ? "Moving in this direction helped." : "This direction hurt."};
  }

  json describe() const override { return json{{"kind", "landscape"}, {"landscape", land_.config()}}; }

  /// Set by the explorer before run(); latents live on the tree.
  void bind(const SearchTree* tree) { tree_ = tree; }

 private:
  const std::vector<double>& latent_of_(NodeId node) const { return tree_->at(node).latent; }

  static ExperimentRecord record(NodeId node, double reward) {
    ExperimentRecord r;
    r.node_id = node;
    r.reward = reward;
    return r;
  }

  SyntheticLandscape land_;
  const SearchTree* tree_ = nullptr;
};

/// Real-task environment: ideation, engineer, executor and analyst through
/// one gateway.
class AgentEnvironment : public Environment {
 public:
  AgentEnvironment(Task task, Gateway& gateway, ToolClient& tools, ExecutorOptions exec_opts, json description)
      : task_(std::move(task)),
        dev_(task_.dev()),
        gateway_(gateway),
        catalog_(ToolCatalog::standard()),
        ideator_(gateway, catalog_.reference()),
        compiler_(gateway, catalog_),
        executor_(gateway, tools, catalog_, exec_opts),
        analyst_(gateway, exec_opts.artifact_root),
        description_(std::move(description)) {
    if (text::trim(task_.problem_description).empty()) {
      throw ConfigError("task '" + task_.name + "' has no problem_description");
    }
  }

  const Task& task() const { return task_; }
  Executor& executor() { return executor_; }

  std::string root_idea() const override {
    return "Naive prompt: ask the question about the unmodified input image.";
  }

  ExperimentRecord execute_baseline() override {
    return executor_.evaluate_on_devset(node_id(0), root_program(), dev_);
  }

  IdeaAttempt propose(const SearchTree& tree, NodeId parent, std::mt19937_64&) override {
    const IdeaNode& p = tree.at(parent);
    IdeationContext ctx;
    ctx.problem_description = task_.problem_description;
    ctx.parent_idea = p.idea;
    for (NodeId s : tree.live_siblings(parent)) ctx.sibling_ideas.push_back(tree.at(s).idea);
    ctx.parent_implications = p.history.implications;
    return ideator_.propose(ctx);
  }

  VisualPromptProgram compile(const SearchTree& tree, NodeId node, LedgerBuffer& calls) override {
    const IdeaNode& n = tree.at(node);
    // The engineer reads the parent's insights; the node has none yet.
    const ExperimentHistory& h = tree.at(*n.parent_id).history;
    return compiler_.compile_idea(task_.problem_description, n.idea, h, &calls, node);
  }

  ExperimentRecord run(NodeId node, const VisualPromptProgram& program) override {
    return executor_.evaluate_on_devset(node, program, dev_);
  }

  void reflect(SearchTree& tree, NodeId node, LedgerBuffer& calls) override {
    analyst_.reflect(tree, node, dev_, [&](const std::string& id) { return executor_.last_final_png(id); }, &calls);
  }

  json describe() const override { return description_; }

  json state() const override { return json{{"backend", gateway_.backend().state()}}; }

  void restore(const SearchTree& tree, const json& state) override {
    if (state.contains("backend")) gateway_.backend().restore(state["backend"]);
    for (const auto& n : tree.nodes()) {
      if (n.executed() && n.record && n.implementation) executor_.seed_cache(*n.implementation, dev_, *n.record);
    }
  }

  Gateway* gateway() override { return &gateway_; }

 private:
  Task task_;
  std::vector<Sample> dev_;
  Gateway& gateway_;
  const ToolCatalog& catalog_;
  Ideator ideator_;
  Compiler compiler_;
  Executor executor_;
  Analyst analyst_;
  json description_;
};

enum class RunStatus { running, completed, aborted };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::completed: return "completed";
    case RunStatus::aborted: return "aborted";
  }
  return "?";
}

inline RunStatus parse_run_status(const std::string& s) {
  if (s == "running") return RunStatus::running;
  if (s == "completed") return RunStatus::completed;
  if (s == "aborted") return RunStatus::aborted;
  throw SnapshotError("unknown run status '" + s + "'");
}

inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr int kSchemaMajor = 1;

/// Everything needed to continue a run.
struct RunState {
  ExplorationConfig config;
  SearchTree tree;
  int iteration_counter = 0;
  std::string rng_state;
  std::vector<LedgerEntry> cost_ledger;
  RunStatus status = RunStatus::running;
  json environment = json::object();
  json environment_state = json::object();
  std::string artifact_root = ".";

  friend bool operator==(const RunState&, const RunState&) = default;
};

inline void to_json(json& j, const RunState& s) {
  j = json{{"schema_version", kSchemaVersion},
           {"status", to_string(s.status)},
           {"iteration_counter", s.iteration_counter},
           {"config", s.config},
           {"rng_state", s.rng_state},
           {"environment", s.environment},
           {"environment_state", s.environment_state},
           {"artifact_root", s.artifact_root},
           {"nodes", s.tree},
           {"cost_ledger", s.cost_ledger}};
}

inline void from_json(const json& j, RunState& s) {
  const std::string version = j.at("schema_version").get<std::string>();
  int major = 0;
  try {
    major = std::stoi(version.substr(0, version.find('.')));
  } catch (const std::exception&) {
    throw SnapshotError("unreadable schema_version '" + version + "'");
  }
  if (major > kSchemaMajor) {
    throw SnapshotError("snapshot schema " + version + " is newer than this build supports (" + kSchemaVersion + ")");
  }
  if (major < kSchemaMajor) throw SnapshotError("snapshot schema " + version + " is no longer supported");
  s.status = parse_run_status(j.at("status").get<std::string>());
  s.iteration_counter = j.at("iteration_counter").get<int>();
  s.config = j.at("config").get<ExplorationConfig>();
  s.rng_state = j.at("rng_state").get<std::string>();
  s.environment = j.at("environment");
  s.environment_state = j.value("environment_state", json::object());
  s.artifact_root = j.value("artifact_root", std::string("."));
  s.tree = j.at("nodes").get<SearchTree>();
  s.cost_ledger = j.at("cost_ledger").get<std::vector<LedgerEntry>>();
}

inline std::string serialize_state(const RunState& s) { return json(s).dump(2) + "\n"; }

inline RunState parse_state(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SnapshotError("snapshot is not a JSON object");
  try {
    return j.get<RunState>();
  } catch (const json::exception& e) {
    throw SnapshotError(std::string("malformed snapshot: ") + e.what());
  }
}

/// Writes via a temporary file and rename, so readers never see a partial
/// snapshot.
inline void write_snapshot(const std::filesystem::path& path, const RunState& s) {
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, serialize_state(s));
  std::filesystem::rename(tmp, path);
}

inline RunState read_snapshot(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw SnapshotError("snapshot " + path.string() + " does not exist");
  return parse_state(read_file(path));
}

struct CostSummary {
  TokenUsage ledger_total;
  TokenUsage execution;
  TokenUsage agents;
};

/// The search loop: select, compile, execute, analyze, backpropagate, expand.
class Explorer {
 public:
  Explorer(ExplorationConfig cfg, Environment& env) : cfg_(std::move(cfg)), env_(env), rng_(cfg_.seed) {
    cfg_.validate();
    if (auto* land = dynamic_cast<LandscapeEnvironment*>(&env_)) land->bind(&tree_);
  }

  /// Iteration 0: executes the baseline root and gives it k children.
  void initialize() {
    ExperimentRecord baseline = env_.execute_baseline();
    tree_ = SearchTree::create_root(env_.root_idea(), env_.root_program(), std::move(baseline));
    tree_.mutable_node(tree_.root().id).latent = env_.root_latent();
    for (int i = 0; i < cfg_.k; ++i) expand_one(tree_.root().id);
    iteration_ = 0;
    status_ = RunStatus::running;
  }

  /// One full iteration. Throws ExhaustedFrontierError when nothing is left
  /// to select, and Error when every selection attempt failed to compile.
  NodeId step() {
    for (int attempt = 0; attempt < cfg_.max_selection_attempts; ++attempt) {
      const NodeId id = select();
      const NodeId parent = *tree_.at(id).parent_id;
      LedgerBuffer calls;
      VisualPromptProgram program;
      try {
        program = env_.compile(tree_, id, calls);
      } catch (const CompileError& e) {
        charge(id, calls);
        spdlog::info("node {} rejected: {}", to_int(id), e.what());
        tree_.reject_node(id, std::string("compile failed: ") + e.what());
        expand_one(parent);
        continue;
      }
      charge(id, calls);
      ExperimentRecord record = env_.run(id, program);
      tree_.mark_executed(id, std::move(program), std::move(record));
      LedgerBuffer analysis;
      env_.reflect(tree_, id, analysis);
      charge(id, analysis);
      for (int i = 0; i < cfg_.k; ++i) expand_one(id);
      expand_one(parent);
      ++iteration_;
      return id;
    }
    throw Error("no node compiled after " + std::to_string(cfg_.max_selection_attempts) + " selection attempts");
  }

  /// Runs until the iteration budget is spent or `stop_after` iterations
  /// have completed. `on_boundary` sees the state after every iteration.
  void run(std::optional<int> stop_after = std::nullopt,
           const std::function<void(const RunState&)>& on_boundary = nullptr) {
    while (iteration_ < cfg_.iteration_budget) {
      if (stop_after && iteration_ >= *stop_after) return;
      step();
      if (iteration_ == cfg_.iteration_budget) status_ = RunStatus::completed;
      if (on_boundary) on_boundary(state());
    }
    status_ = RunStatus::completed;
  }

  RunState state() const {
    RunState s;
    s.config = cfg_;
    s.tree = tree_;
    s.iteration_counter = iteration_;
    std::ostringstream rng;
    rng << rng_;
    s.rng_state = rng.str();
    if (Gateway* g = env_.gateway()) s.cost_ledger = g->ledger();
    s.status = status_;
    s.environment = env_.describe();
    s.environment_state = env_.state();
    return s;
  }

  void restore(const RunState& s) {
    cfg_ = s.config;
    cfg_.validate();
    tree_ = s.tree;
    iteration_ = s.iteration_counter;
    std::istringstream rng(s.rng_state);
    rng >> rng_;
    if (rng.fail()) throw SnapshotError("unreadable rng_state");
    status_ = s.status == RunStatus::completed ? RunStatus::completed : RunStatus::running;
    if (Gateway* g = env_.gateway()) g->restore_ledger(s.cost_ledger);
    env_.restore(tree_, s.environment_state);
  }

  CostSummary costs() const {
    CostSummary c;
    if (Gateway* g = env_.gateway()) c.ledger_total = g->ledger_total();
    for (const auto& n : tree_.nodes()) {
      if (n.record) c.execution += n.record->tokens_total;
      c.agents += n.agent_usage;
    }
    return c;
  }

  const SearchTree& tree() const { return tree_; }
  const ExplorationConfig& config() const { return cfg_; }
  int iteration() const { return iteration_; }
  RunStatus status() const { return status_; }

 private:
  NodeId select() {
    switch (cfg_.policy) {
      case SelectionPolicy::greedy_frontier: return select_greedy_frontier(tree_);
      case SelectionPolicy::random_frontier: return select_random_frontier(tree_, rng_);
      case SelectionPolicy::nuct: break;
    }
    SelectionResult r = select_node(tree_, cfg_);
    for (auto& [id, score] : r.scored) tree_.mutable_node(id).last_priority = std::move(score);
    return r.selected;
  }

  /// Commits a node's agent calls to the ledger and its usage to the node.
  void charge(NodeId id, LedgerBuffer& calls) {
    calls.set_node(id);
    tree_.mutable_node(id).agent_usage += calls.total();
    if (Gateway* g = env_.gateway()) g->commit(calls);
  }

  /// Adds one live child under `parent` through the feasibility gate.
  /// Failed attempts are kept as rejected nodes.
  void expand_one(NodeId parent) {
    GateOutcome g = gate_and_regenerate([&](int) { return env_.propose(tree_, parent, rng_); }, cfg_);
    for (size_t i = 0; i < g.attempts.size(); ++i) {
      IdeaAttempt& a = g.attempts[i];
      const NodeId id = tree_.add_child(parent, a.idea, a.eval);
      tree_.mutable_node(id).latent = a.latent;
      charge(id, a.calls);
      if (i != g.kept) {
        tree_.reject_node(id, "feasibility " + std::to_string(a.eval.feasibility_raw) + " below threshold " +
                                  std::to_string(cfg_.feasibility_threshold));
      } else if (g.warning) {
        tree_.mutable_node(id).warning = "kept after " + std::to_string(g.attempts.size()) +
                                         " attempts below the feasibility threshold";
      }
    }
  }

  ExplorationConfig cfg_;
  Environment& env_;
  std::mt19937_64 rng_;
  SearchTree tree_;
  int iteration_ = 0;
  RunStatus status_ = RunStatus::running;
};

}  // namespace vpe
